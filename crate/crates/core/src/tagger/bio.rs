use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::action::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prefix {
    B,
    I,
    O,
}

/// A BIO label; `role` is empty iff the prefix is `O`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BioLabel {
    pub prefix: Prefix,
    pub role: String,
}

impl BioLabel {
    pub fn outside() -> BioLabel {
        BioLabel {
            prefix: Prefix::O,
            role: String::new(),
        }
    }

    pub fn begin(role: &str) -> BioLabel {
        BioLabel {
            prefix: Prefix::B,
            role: role.to_string(),
        }
    }

    pub fn inside(role: &str) -> BioLabel {
        BioLabel {
            prefix: Prefix::I,
            role: role.to_string(),
        }
    }

    pub fn is_outside(&self) -> bool {
        self.prefix == Prefix::O
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prefix {
            Prefix::O => f.write_str("O"),
            Prefix::B => write!(f, "B-{}", self.role),
            Prefix::I => write!(f, "I-{}", self.role),
        }
    }
}

impl FromStr for BioLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioLabel::outside());
        }
        match s.split_once('-') {
            Some(("B", role)) if !role.is_empty() => Ok(BioLabel::begin(role)),
            Some(("I", role)) if !role.is_empty() => Ok(BioLabel::inside(role)),
            _ => Err(format!("malformed BIO label `{s}`")),
        }
    }
}

impl Serialize for BioLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous labeled span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Chunk {
    pub span: Span,
    pub role: String,
}

/// Extracts chunks. A stray `I-x` (after `O` or another role) opens a new
/// chunk, so ill-formed sequences still yield a total reading.
pub fn chunks(labels: &[BioLabel]) -> Vec<Chunk> {
    let mut out: Vec<Chunk> = Vec::new();
    let mut open = false;
    for (i, l) in labels.iter().enumerate() {
        match l.prefix {
            Prefix::O => open = false,
            Prefix::B => {
                out.push(Chunk {
                    span: Span::new(i, i + 1),
                    role: l.role.clone(),
                });
                open = true;
            }
            Prefix::I => match out.last_mut() {
                Some(c) if open && c.role == l.role && c.span.end == i => c.span.end = i + 1,
                _ => {
                    out.push(Chunk {
                        span: Span::new(i, i + 1),
                        role: l.role.clone(),
                    });
                    open = true;
                }
            },
        }
    }
    out
}

/// Labels for `len` tokens with the given non-overlapping chunks.
pub fn labels_from_chunks(len: usize, chunks: &[Chunk]) -> Vec<BioLabel> {
    let mut labels = vec![BioLabel::outside(); len];
    for c in chunks {
        for i in c.span.start..c.span.end.min(len) {
            labels[i] = if i == c.span.start {
                BioLabel::begin(&c.role)
            } else {
                BioLabel::inside(&c.role)
            };
        }
    }
    labels
}

/// `I-x` only continues a `B-x` or `I-x`, and roles are empty iff `O`.
pub fn is_well_formed(labels: &[BioLabel]) -> bool {
    let mut prev: Option<&BioLabel> = None;
    for l in labels {
        let ok = match l.prefix {
            Prefix::O => l.role.is_empty(),
            Prefix::B => !l.role.is_empty(),
            Prefix::I => {
                !l.role.is_empty() && prev.is_some_and(|p| p.prefix != Prefix::O && p.role == l.role)
            }
        };
        if !ok {
            return false;
        }
        prev = Some(l);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<BioLabel> {
        s.split_whitespace().map(|l| l.parse().unwrap()).collect()
    }

    #[test]
    fn chunk_extraction() {
        let l = labels("B-color I-color O B-shape B-shape I-shape");
        let c = chunks(&l);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].span, Span::new(0, 2));
        assert_eq!(c[2].span, Span::new(4, 6));
        assert_eq!(labels_from_chunks(6, &c), l);
    }

    #[test]
    fn stray_inside_opens_chunk() {
        let l = labels("O I-color I-color B-x I-y");
        assert!(!is_well_formed(&l));
        let c = chunks(&l);
        assert_eq!(c.iter().map(|c| c.span).collect::<Vec<_>>(), vec![
            Span::new(1, 3),
            Span::new(3, 4),
            Span::new(4, 5)
        ]);
    }

    #[test]
    fn label_text_roundtrip() {
        for s in ["O", "B-yField", "I-strokeColor"] {
            assert_eq!(s.parse::<BioLabel>().unwrap().to_string(), s);
        }
        assert!("X-color".parse::<BioLabel>().is_err());
        assert!("B-".parse::<BioLabel>().is_err());
        assert!(is_well_formed(&labels("B-a I-a O B-b")));
        assert!(!is_well_formed(&labels("B-a I-b")));
    }
}
