//! Tweet-oriented word tokenizer.

/// Splits `text` into lowercased word tokens.
///
/// Whitespace and punctuation separate tokens and are never emitted. URLs and
/// `@` mentions are dropped, a leading `RT @user:` retweet marker is removed,
/// hashtags keep their body (`#Paris` becomes `paris`), apostrophes inside a
/// word are kept, and emoji/pictographs come out as single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let text = strip_retweet_prefix(text);
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            continue;
        }
        tokenize_chunk(chunk, &mut out);
    }
    out
}

fn strip_retweet_prefix(text: &str) -> &str {
    let trimmed = text.trim_start();
    let Some(rest) = trimmed.strip_prefix("RT ") else {
        return text;
    };
    let rest = rest.trim_start();
    if !rest.starts_with('@') {
        return text;
    }
    match rest.find(':') {
        Some(colon) if !rest[..colon].contains(char::is_whitespace) => &rest[colon + 1..],
        _ => text,
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_pictograph(c: char) -> bool {
    if c.is_ascii() || c.is_alphanumeric() || c.is_whitespace() || c.is_control() {
        return false;
    }
    let cp = c as u32;
    // general punctuation, CJK punctuation, fullwidth ASCII punctuation,
    // latin-1 punctuation, variation selectors and joiners
    !matches!(cp,
        0x00A0..=0x00BF
        | 0x2000..=0x206F
        | 0x2E00..=0x2E7F
        | 0x3000..=0x303F
        | 0xFE00..=0xFE0F
        | 0xFF00..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65
        | 0x1F3FB..=0x1F3FF)
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut word = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '@' && word.is_empty() && i + 1 < chars.len() && is_word_char(chars[i + 1]) {
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            continue;
        }
        if is_word_char(c) {
            word.extend(c.to_lowercase());
        } else if (c == '\'' || c == '\u{2019}')
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|n| is_word_char(*n))
        {
            word.push('\'');
        } else {
            flush(&mut word, out);
            if is_pictograph(c) {
                out.push(c.to_string());
            }
        }
        i += 1;
    }
    flush(&mut word, out);
}

fn flush(word: &mut String, out: &mut Vec<String>) {
    if !word.is_empty() {
        out.push(std::mem::take(word));
    }
}
