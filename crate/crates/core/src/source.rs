//! Turning a dump code block into a runnable program text.

use alloc::string::String;

/// Decode HTML entities, normalize line endings, drop a leading BOM and
/// remove the common leading whitespace of all non-blank lines.
///
/// Whitespace-only lines become empty. Entity decoding is a single pass, so
/// `&amp;lt;` yields `&lt;`.
pub fn prepare_source(raw: &str) -> String {
    let decoded = decode_entities(raw);
    let text = decoded.strip_prefix('\u{feff}').unwrap_or(&decoded);
    let text = text.replace("\r\n", "\n");
    dedent(&text)
}

/// Decode the named entities `lt gt amp quot apos` and numeric `&#NN;` /
/// `&#xHH;` references. Anything else is copied through untouched.
pub fn decode_entities(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        match decode_one(rest) {
            Some((ch, used)) => {
                out.push(ch);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one(s: &str) -> Option<(char, usize)> {
    // longest reference we accept is "&#x10FFFF;"
    let end = s.char_indices().take(12).find(|&(_, c)| c == ';')?.0;
    let body = &s[1..end];
    let ch = match body {
        "lt" => '<',
        "gt" => '>',
        "amp" => '&',
        "quot" => '"',
        "apos" => '\'',
        _ => {
            let num = body.strip_prefix('#')?;
            let value = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse::<u32>().ok()?,
            };
            char::from_u32(value)?
        }
    };
    Some((ch, end + 1))
}

fn dedent(text: &str) -> String {
    let mut margin: Option<&str> = None;
    for line in text.split('\n') {
        if line.trim().is_empty() {
            continue;
        }
        let indent = &line[..line.len() - line.trim_start_matches([' ', '\t']).len()];
        margin = Some(match margin {
            None => indent,
            Some(m) => common_prefix(m, indent),
        });
    }
    let margin = margin.unwrap_or("");
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if line.trim().is_empty() {
            continue;
        }
        out.push_str(&line[margin.len()..]);
    }
    out
}

fn common_prefix<'a>(a: &'a str, b: &str) -> &'a str {
    let n = a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count();
    &a[..n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        assert_eq!(prepare_source("print(1)"), "print(1)");
    }

    #[test]
    fn entities() {
        assert_eq!(prepare_source("x = 1 &lt; 2"), "x = 1 < 2");
        assert_eq!(
            decode_entities("&quot;a&quot; &amp;&amp; b &gt; c &#39;d&#39; &#x41;"),
            "\"a\" && b > c 'd' A"
        );
        assert_eq!(decode_entities("&amp;lt;"), "&lt;");
        assert_eq!(decode_entities("a & b &bogus; &#;"), "a & b &bogus; &#;");
        assert_eq!(decode_entities("trailing &"), "trailing &");
    }

    #[test]
    fn dedents_uniformly() {
        let raw = "    def f():\n        return 1\n\n    print(f())";
        assert_eq!(prepare_source(raw), "def f():\n    return 1\n\nprint(f())");
    }

    #[test]
    fn blank_lines_do_not_limit_margin() {
        assert_eq!(prepare_source("  a\n \n  b\n"), "a\n\nb\n");
    }

    #[test]
    fn mixed_tabs_spaces_keep_common_prefix() {
        assert_eq!(prepare_source("\t  a\n\t b"), " a\nb");
    }

    #[test]
    fn crlf_and_bom() {
        assert_eq!(prepare_source("\u{feff}a\r\nb\r\n"), "a\nb\n");
    }

    proptest! {
        #[test]
        fn prefixing_every_line_is_undone(lines in proptest::collection::vec("[a-z(][ -~]{0,20}", 1..6), pad in 1usize..8) {
            let body = lines.iter().map(|l| l.trim_end().to_string()).collect::<Vec<_>>().join("\n");
            let body = body.replace('&', "and");
            let padded = body.split('\n').map(|l| if l.is_empty() { String::new() } else { format!("{}{}", " ".repeat(pad), l) }).collect::<Vec<_>>().join("\n");
            prop_assert_eq!(prepare_source(&padded), prepare_source(&body));
        }

        #[test]
        fn idempotent(raw in "[ -~\t\n]{0,80}") {
            let once = prepare_source(&raw.replace('&', ""));
            prop_assert_eq!(prepare_source(&once), once.clone());
        }
    }
}
