//! `[section]`-headed UTF-8 text used for prompt data files.
//!
//! Lines starting with `#` are comments. Content lines keep their order;
//! leading and trailing blank lines of each section are dropped.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectionedText {
    sections: BTreeMap<String, Vec<String>>,
}

impl SectionedText {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_ascii_lowercase();
                if sections.contains_key(&name) {
                    return Err(format!("line {}: duplicate section [{name}]", i + 1));
                }
                sections.insert(name.clone(), Vec::new());
                current = Some(name);
                continue;
            }
            match &current {
                Some(name) => sections.get_mut(name).unwrap().push(line.trim_end().to_string()),
                None if trimmed.is_empty() => {}
                None => return Err(format!("line {}: content before first section", i + 1)),
            }
        }
        for lines in sections.values_mut() {
            while lines.last().is_some_and(|l| l.trim().is_empty()) {
                lines.pop();
            }
            let lead = lines.iter().take_while(|l| l.trim().is_empty()).count();
            lines.drain(..lead);
        }
        Ok(Self { sections })
    }

    pub fn has(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// Section body joined with newlines, or `None` if absent.
    pub fn text(&self, name: &str) -> Option<String> {
        self.sections.get(name).map(|l| l.join("\n"))
    }

    /// Non-blank lines, trimmed, with a leading `- ` bullet removed.
    pub fn items(&self, name: &str) -> Vec<String> {
        self.sections
            .get(name)
            .map(|lines| {
                lines
                    .iter()
                    .map(|l| l.trim())
                    .filter(|l| !l.is_empty())
                    .map(|l| l.strip_prefix("- ").unwrap_or(l).trim().to_string())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// `key: value` items, in file order.
    pub fn pairs(&self, name: &str) -> Result<Vec<(String, String)>, String> {
        self.items(name)
            .into_iter()
            .map(|item| {
                item.split_once(':')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| format!("[{name}] entry without ':': {item}"))
            })
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let s = SectionedText::parse(
            "# comment\n\n[Persona]\n\nYou are a maintainer.\n\n[rules]\n- one\n- two: x\n\n",
        )
        .unwrap();
        assert_eq!(s.text("persona").unwrap(), "You are a maintainer.");
        assert_eq!(s.items("rules"), vec!["one", "two: x"]);
        assert!(s.pairs("rules").is_err());
        assert!(!s.has("missing"));
    }

    #[test]
    fn rejects_orphan_content_and_duplicates() {
        assert!(SectionedText::parse("hello\n[a]").is_err());
        assert!(SectionedText::parse("[a]\nx\n[a]\ny").is_err());
    }
}
