//! Dutch number verbalization in split form: "274" becomes the four tokens
//! `twee honderd vier-en zeventig` rather than one agglutinated word.

/// Largest magnitude (exclusive) the cardinal grammar covers.
pub const MAX_CARDINAL: u64 = 1_000_000_000_000;

const SMALL: [&str; 20] = [
    "nul", "een", "twee", "drie", "vier", "vijf", "zes", "zeven", "acht", "negen", "tien",
    "elf", "twaalf", "dertien", "veertien", "vijftien", "zestien", "zeventien", "achttien",
    "negentien",
];

const TENS: [&str; 10] = [
    "", "", "twintig", "dertig", "veertig", "vijftig", "zestig", "zeventig", "tachtig",
    "negentig",
];

/// Verbalizes a cardinal below [`MAX_CARDINAL`]; `None` beyond it.
pub fn cardinal(n: u64) -> Option<Vec<String>> {
    if n >= MAX_CARDINAL {
        return None;
    }
    if n == 0 {
        return Some(vec![SMALL[0].to_owned()]);
    }
    let mut out = Vec::new();
    let billions = n / 1_000_000_000;
    let millions = (n / 1_000_000) % 1000;
    let thousands = (n / 1000) % 1000;
    let rest = n % 1000;
    if billions > 0 {
        below_thousand(billions, &mut out);
        out.push("miljard".into());
    }
    if millions > 0 {
        below_thousand(millions, &mut out);
        out.push("miljoen".into());
    }
    if thousands > 0 {
        if thousands > 1 {
            below_thousand(thousands, &mut out);
        }
        out.push("duizend".into());
    }
    if rest > 0 {
        below_thousand(rest, &mut out);
    }
    Some(out)
}

fn below_thousand(n: u64, out: &mut Vec<String>) {
    debug_assert!(n > 0 && n < 1000);
    let hundreds = n / 100;
    let rest = n % 100;
    if hundreds > 1 {
        out.push(SMALL[hundreds as usize].into());
    }
    if hundreds > 0 {
        out.push("honderd".into());
    }
    if rest > 0 {
        below_hundred(rest, out);
    }
}

fn below_hundred(n: u64, out: &mut Vec<String>) {
    let n = n as usize;
    if n < 20 {
        out.push(SMALL[n].into());
        return;
    }
    let (tens, unit) = (n / 10, n % 10);
    if unit > 0 {
        out.push(format!("{}-en", SMALL[unit]));
    }
    out.push(TENS[tens].into());
}

/// Ordinal form: the cardinal with its last word inflected.
pub fn ordinal(n: u64) -> Option<Vec<String>> {
    let mut words = cardinal(n)?;
    let last = words.pop().expect("cardinal is never empty");
    let inflected = match last.as_str() {
        "een" => "eerste".to_owned(),
        "drie" => "derde".to_owned(),
        "acht" => "achtste".to_owned(),
        w if w.ends_with("tig")
            || matches!(w, "honderd" | "duizend" | "miljoen" | "miljard") =>
        {
            format!("{w}ste")
        }
        w => format!("{w}de"),
    };
    words.push(inflected);
    Some(words)
}

/// Reads out each digit separately ("007" → nul nul zeven).
pub fn digitwise(digits: &str) -> Vec<String> {
    digits
        .chars()
        .filter_map(|c| c.to_digit(10))
        .map(|d| SMALL[d as usize].to_owned())
        .collect()
}

/// Verbalizes one run of ASCII digits. Runs with a leading zero are read
/// digit by digit; other runs as cardinals.
pub fn digit_group(digits: &str) -> Option<Vec<String>> {
    debug_assert!(!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()));
    if digits.len() > 1 && digits.starts_with('0') {
        return Some(digitwise(digits));
    }
    // Anything longer than 12 digits is past the grammar anyway.
    if digits.len() > 12 {
        return None;
    }
    cardinal(digits.parse().ok()?)
}
