//! Mapping free-text completions onto label indices.

use candidate_distill::{CandidateSet, LabelSpace};

use crate::error::{Error, Result};

/// Case-insensitive surface forms for each label: its name plus any aliases.
#[derive(Debug, Clone)]
pub struct LabelMatcher {
    num_classes: usize,
    /// Lowercased pattern and label, longest pattern first.
    patterns: Vec<(String, usize)>,
}

impl LabelMatcher {
    pub fn new(label_space: &LabelSpace) -> Self {
        Self::with_aliases(label_space, &[]).expect("names are valid labels")
    }

    /// `aliases` pairs an extra surface form with a label index.
    pub fn with_aliases(label_space: &LabelSpace, aliases: &[(String, usize)]) -> Result<Self> {
        let c = label_space.num_classes();
        let mut patterns: Vec<(String, usize)> =
            label_space.names().iter().enumerate().map(|(i, n)| (n.trim().to_lowercase(), i)).collect();
        for (alias, label) in aliases {
            label_space.check_label(*label)?;
            let alias = alias.trim().to_lowercase();
            if !alias.is_empty() {
                patterns.push((alias, *label));
            }
        }
        patterns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
        patterns.dedup();
        Ok(Self { num_classes: c, patterns })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Labels in order of first mention.
    pub fn labels_in_order(&self, response: &str) -> Vec<usize> {
        let mut found = Vec::new();
        for segment in segments(response) {
            for label in self.scan(&segment) {
                if !found.contains(&label) {
                    found.push(label);
                }
            }
        }
        found
    }

    /// Left-to-right scan, taking the longest pattern that starts and ends on a
    /// word boundary.
    fn scan(&self, segment: &str) -> Vec<usize> {
        let text = segment.to_lowercase();
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < text.len() {
            if !text.is_char_boundary(i) || (i > 0 && is_word_byte(bytes[i - 1])) {
                i += 1;
                continue;
            }
            let hit = self.patterns.iter().find(|(p, _)| {
                text[i..].starts_with(p.as_str()) && bytes.get(i + p.len()).is_none_or(|&b| !is_word_byte(b))
            });
            match hit {
                Some((p, label)) => {
                    out.push(*label);
                    i += p.len();
                }
                None => i += 1,
            }
        }
        out
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// Splits on commas, semicolons, newlines and the standalone word "or".
fn segments(response: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in response.split([',', ';', '\n', '\r']) {
        let mut current = Vec::new();
        for word in part.split_whitespace() {
            if word.eq_ignore_ascii_case("or") {
                out.push(current.join(" "));
                current.clear();
            } else {
                current.push(word);
            }
        }
        out.push(current.join(" "));
    }
    out.retain(|s| !s.is_empty());
    out
}

/// Every label mentioned in `response`.
pub fn parse_candidates(response: &str, matcher: &LabelMatcher) -> Result<CandidateSet> {
    let labels = matcher.labels_in_order(response);
    if labels.is_empty() {
        return Err(Error::NoLabelFound(response.to_string()));
    }
    Ok(CandidateSet::new(labels, matcher.num_classes())?)
}

/// The first label mentioned in `response`.
pub fn parse_single(response: &str, matcher: &LabelMatcher) -> Result<usize> {
    matcher.labels_in_order(response).first().copied().ok_or_else(|| Error::NoLabelFound(response.to_string()))
}

/// Label names joined the way a candidate answer is rendered in prompts.
pub fn render_labels(set: &CandidateSet, label_space: &LabelSpace) -> String {
    set.iter().map(|l| label_space.name(l)).collect::<Vec<_>>().join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::trec;

    fn matcher() -> LabelMatcher {
        let (space, aliases) = (trec::label_space(), trec::aliases());
        LabelMatcher::with_aliases(&space, &aliases).unwrap()
    }

    #[test]
    fn semicolon_list() {
        let s = parse_candidates("Entities; Locations", &matcher()).unwrap();
        assert_eq!(s.labels(), &[trec::ENTY, trec::LOC]);
    }

    #[test]
    fn case_folding_and_aliases() {
        assert_eq!(parse_candidates("entities", &matcher()).unwrap().labels(), &[trec::ENTY]);
        assert_eq!(parse_candidates("NUM or loc", &matcher()).unwrap().labels(), &[trec::LOC, trec::NUM]);
    }

    #[test]
    fn nothing_recognised() {
        assert!(matches!(parse_candidates("I cannot decide", &matcher()), Err(Error::NoLabelFound(_))));
    }

    #[test]
    fn aliases_need_word_boundaries() {
        // "number" and "locale" must not match NUM or LOC.
        assert!(parse_candidates("a number in some locale", &matcher()).is_err());
    }

    #[test]
    fn longest_name_wins() {
        let space = LabelSpace::new(vec!["Human".into(), "Human beings".into()]).unwrap();
        let m = LabelMatcher::new(&space);
        assert_eq!(parse_candidates("Human beings", &m).unwrap().labels(), &[1]);
        assert_eq!(parse_candidates("human, or human beings", &m).unwrap().labels(), &[0, 1]);
    }

    #[test]
    fn first_mention_for_single() {
        assert_eq!(parse_single("Locations, maybe Entities", &matcher()).unwrap(), trec::LOC);
    }

    #[test]
    fn rendered_sets_reparse() {
        let space = trec::label_space();
        let set = CandidateSet::new([trec::DESC, trec::HUM, trec::NUM], 6).unwrap();
        assert_eq!(parse_candidates(&render_labels(&set, &space), &matcher()).unwrap(), set);
    }
}
