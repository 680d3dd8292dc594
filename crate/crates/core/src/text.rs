//! Tokenization and literal recognition shared by every stage.
//!
//! Tokens keep their byte offsets into the original utterance so that
//! highlighting layers can map labels back onto the typed text.

use serde::{Deserialize, Serialize};

/// A token and its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits text into word, number and punctuation tokens.
///
/// Punctuation is kept as separate tokens. Numbers glued to a unit
/// (`10px`) are split into the number and the unit. Decimal numbers,
/// ISO and `MM/DD/YYYY` dates, hyphenated words (`x-axis`) and hex colors
/// (`#1f77b4`) stay whole.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| -> usize {
        if i < chars.len() {
            chars[i].0
        } else {
            text.len()
        }
    };
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            let hex = (1..=6).all(|k| {
                chars
                    .get(i + k)
                    .map(|(_, h)| h.is_ascii_hexdigit())
                    .unwrap_or(false)
            });
            let boundary = chars
                .get(i + 7)
                .map(|(_, n)| !n.is_alphanumeric())
                .unwrap_or(true);
            if hex && boundary {
                tokens.push(Token {
                    text: text[start..end_of(i + 7)].to_string(),
                    start,
                    end: end_of(i + 7),
                });
                i += 7;
                continue;
            }
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let ch = chars[j].1;
                if ch.is_alphanumeric() {
                    j += 1;
                    continue;
                }
                // joiners between two alphanumerics: decimal point, date separators, hyphen
                let prev = chars[j - 1].1;
                let next = chars.get(j + 1).map(|(_, n)| *n);
                let joined = match (ch, next) {
                    ('.', Some(n)) => prev.is_ascii_digit() && n.is_ascii_digit(),
                    ('/', Some(n)) => prev.is_ascii_digit() && n.is_ascii_digit(),
                    ('-', Some(n)) => {
                        (prev.is_ascii_digit() && n.is_ascii_digit())
                            || (prev.is_alphabetic() && n.is_alphabetic())
                    }
                    _ => false,
                };
                if joined {
                    j += 2;
                } else {
                    break;
                }
            }
            let word_end = end_of(j);
            push_word(&mut tokens, &text[start..word_end], start);
            i = j;
            continue;
        }
        tokens.push(Token {
            text: c.to_string(),
            start,
            end: start + c.len_utf8(),
        });
        i += 1;
    }
    tokens
}

// Splits a leading number off a word such as `10px` or `3rd`.
fn push_word(tokens: &mut Vec<Token>, word: &str, offset: usize) {
    let starts_with_digit = word.chars().next().is_some_and(|c| c.is_ascii_digit());
    if starts_with_digit && !is_date(word) {
        let split = word
            .char_indices()
            .find(|(_, c)| c.is_alphabetic())
            .map(|(i, _)| i);
        if let Some(at) = split {
            let (num, unit) = word.split_at(at);
            if parse_number(num).is_some() {
                tokens.push(Token {
                    text: num.to_string(),
                    start: offset,
                    end: offset + at,
                });
                tokens.push(Token {
                    text: unit.to_string(),
                    start: offset + at,
                    end: offset + word.len(),
                });
                return;
            }
        }
    }
    tokens.push(Token {
        text: word.to_string(),
        start: offset,
        end: offset + word.len(),
    });
}

/// Lower-cases and joins tokens with single spaces.
pub fn normalize_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(|t| t.as_ref().to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized form of a free phrase: tokenized, lower-cased, single-spaced.
/// Underscores act as spaces so `car_sales` and `car sales` coincide.
pub fn normalize_phrase(phrase: &str) -> String {
    let spaced = phrase.replace('_', " ");
    let toks: Vec<String> = tokenize(&spaced).into_iter().map(|t| t.text).collect();
    normalize_tokens(&toks)
}

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric())
}

pub fn parse_integer(token: &str) -> Option<i64> {
    let digits = token.strip_prefix('-').unwrap_or(token);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

pub fn parse_number(token: &str) -> Option<f64> {
    let body = token.strip_prefix('-').unwrap_or(token);
    if body.is_empty() || !body.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return None;
    }
    if !body.chars().all(|c| c.is_ascii_digit() || c == '.') || body.matches('.').count() > 1 {
        return None;
    }
    if body.ends_with('.') {
        return None;
    }
    token.parse().ok()
}

pub const YEAR_RANGE: std::ops::RangeInclusive<i64> = 1800..=2199;

/// A four-digit integer inside the recognized year range.
pub fn is_year(token: &str) -> bool {
    token.len() == 4
        && token.chars().all(|c| c.is_ascii_digit())
        && parse_integer(token).is_some_and(|y| YEAR_RANGE.contains(&y))
}

/// Calendar date parsed from `YYYY-MM-DD` or `MM/DD/YYYY`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Date {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl Date {
    pub fn parse(token: &str) -> Option<Date> {
        let (year, month, day) = if let Some((y, rest)) = token.split_once('-') {
            let (m, d) = rest.split_once('-')?;
            if y.len() != 4 {
                return None;
            }
            (y, m, d)
        } else {
            let mut parts = token.split('/');
            let m = parts.next()?;
            let d = parts.next()?;
            let y = parts.next()?;
            if parts.next().is_some() || y.len() != 4 {
                return None;
            }
            (y, m, d)
        };
        let all_digits = |s: &str| !s.is_empty() && s.len() <= 4 && s.chars().all(|c| c.is_ascii_digit());
        if !(all_digits(year) && all_digits(month) && all_digits(day)) || month.len() > 2 || day.len() > 2 {
            return None;
        }
        let date = Date {
            year: year.parse().ok()?,
            month: month.parse().ok()?,
            day: day.parse().ok()?,
        };
        let max_day = match date.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 if date.is_leap() => 29,
            2 => 28,
            _ => return None,
        };
        (1..=max_day).contains(&date.day).then_some(date)
    }

    fn is_leap(&self) -> bool {
        (self.year % 4 == 0 && self.year % 100 != 0) || self.year % 400 == 0
    }

    /// Days since 0000-03-01, used as a numeric axis position.
    pub fn ordinal(&self) -> i64 {
        let (y, m) = if self.month <= 2 {
            (self.year as i64 - 1, self.month as i64 + 9)
        } else {
            (self.year as i64, self.month as i64 - 3)
        };
        365 * y + y.div_euclid(4) - y.div_euclid(100) + y.div_euclid(400) + (153 * m + 2) / 5 + self.day as i64 - 1
    }

    pub fn quarter(&self) -> u32 {
        (self.month - 1) / 3 + 1
    }
}

impl std::fmt::Display for Date {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

pub fn is_date(token: &str) -> bool {
    Date::parse(token).is_some()
}

/// Identifier-shaped text that can be rendered without quotes.
pub fn is_bare_word(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
