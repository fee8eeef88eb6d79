use std::sync::LazyLock;

use regex::Regex;

use super::{ClassificationResult, DetoxResult, LlmError};
use crate::taxonomy::{normalize_label, LabelSet};

static RESPONSE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<\s*response\s*>(.*?)<\s*/\s*response\s*>").unwrap());
static CATEGORY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<\s*category\s*>(.*?)<\s*/\s*category\s*>").unwrap());
static LABEL_DELIM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)[,;]|\s+and\s+").unwrap());

const EMPHASIS: &str = r"(?:\*\*|__|\*|_)?";
static DETOX_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i){EMPHASIS}detoxified{EMPHASIS}[ \t]*:{EMPHASIS}")).unwrap());
static RATIONALE_MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?im)(?:^[ \t]*(?:[-*+]|\d+\.)[ \t]+)?{EMPHASIS}rationale{EMPHASIS}[ \t]*:{EMPHASIS}"
    ))
    .unwrap()
});

/// Splits a `<category>` body on comma, semicolon or " and ".
pub(crate) fn split_labels(body: &str) -> Vec<&str> {
    LABEL_DELIM.split(body).map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn parse_coach_response(raw: &str) -> Result<ClassificationResult, LlmError> {
    let response = RESPONSE
        .captures(raw)
        .ok_or_else(|| LlmError::MalformedResponse("missing <response> element".into()))?;
    let category = CATEGORY
        .captures(raw)
        .ok_or_else(|| LlmError::MalformedResponse("missing <category> element".into()))?;
    let rationale = response[1].trim();
    if rationale.is_empty() {
        return Err(LlmError::MalformedResponse("empty <response>".into()));
    }
    let labels = split_labels(&category[1])
        .into_iter()
        .map(normalize_label)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassificationResult {
        labels: LabelSet::new(labels)?,
        rationale: rationale.to_string(),
        raw_response: raw.to_string(),
        retry_count: 0,
    })
}

pub fn render_coach_xml(labels: &LabelSet, rationale: &str) -> String {
    format!("<response>{rationale}</response> <category>{labels}</category>")
}

pub fn parse_reframe_response(raw: &str) -> Result<DetoxResult, LlmError> {
    let detox = DETOX_MARKER
        .find(raw)
        .ok_or_else(|| LlmError::MalformedResponse("missing Detoxified: marker".into()))?;
    let rest = &raw[detox.end()..];
    let rationale = RATIONALE_MARKER
        .find(rest)
        .ok_or_else(|| LlmError::MalformedResponse("missing Rationale: marker".into()))?;
    let detoxified = rest[..rationale.start()]
        .trim_end_matches(|c: char| c.is_whitespace() || c == ';')
        .trim();
    if detoxified.is_empty() {
        return Err(LlmError::MalformedResponse("empty detoxified text".into()));
    }
    let reason = rest[rationale.end()..].trim();
    if reason.is_empty() {
        return Err(LlmError::MalformedResponse("empty rationale".into()));
    }
    Ok(DetoxResult {
        detoxified: detoxified.to_string(),
        rationale: reason.to_string(),
        raw_response: raw.to_string(),
        retry_count: 0,
    })
}

pub fn render_reframe_text(detoxified: &str, rationale: &str) -> String {
    format!("Detoxified: {detoxified}; Rationale: {rationale}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::CategoryLabel::*;

    fn labels(raw: &str) -> LabelSet {
        parse_coach_response(raw).unwrap().labels
    }

    #[test]
    fn coach_single() {
        let r = parse_coach_response("<response>uses profanity</response><category>Profanity</category>").unwrap();
        assert_eq!(r.labels, LabelSet::single(Profanity));
        assert_eq!(r.rationale, "uses profanity");
    }

    #[test]
    fn coach_delimiters() {
        let want = LabelSet::new([Profanity, Insult]).unwrap();
        assert_eq!(labels("<response>r</response><category>Profanity, Insult</category>"), want);
        assert_eq!(labels("<response>r</response><category>Profanity; Insult</category>"), want);
        assert_eq!(labels("<response>r</response><category>profanity and insult</category>"), want);
        assert_eq!(
            labels("<response>r</response><category>Identity Attack, OD toxicity</category>"),
            LabelSet::new([IdentityAttack, ObjectDirectedToxicity]).unwrap()
        );
    }

    #[test]
    fn coach_tolerates_surrounding_text_and_case() {
        let raw = "Sure.\n<Response>\n step 1\n step 2\n</Response>\n<CATEGORY> Threats </CATEGORY>\nthanks";
        let r = parse_coach_response(raw).unwrap();
        assert_eq!(r.labels, LabelSet::single(Threat));
        assert_eq!(r.rationale, "step 1\n step 2");
    }

    #[test]
    fn coach_first_element_wins() {
        let r = parse_coach_response(
            "<response>a</response><category>Insult</category><response>b</response><category>Threat</category>",
        )
        .unwrap();
        assert_eq!(r.rationale, "a");
        assert_eq!(r.labels, LabelSet::single(Insult));
    }

    #[test]
    fn coach_errors() {
        assert!(matches!(parse_coach_response("no xml at all"), Err(LlmError::MalformedResponse(_))));
        assert!(matches!(
            parse_coach_response("<response>r</response>"),
            Err(LlmError::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_coach_response("<category>Insult</category>"),
            Err(LlmError::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_coach_response("<response>r</response><category>Sarcasm</category>"),
            Err(LlmError::UnknownLabel(l)) if l == "Sarcasm"
        ));
        assert!(matches!(
            parse_coach_response("<response>r</response><category>Non-Toxic, Insult</category>"),
            Err(LlmError::ConflictingLabels(_))
        ));
        assert!(matches!(
            parse_coach_response("<response>r</response><category> , </category>"),
            Err(LlmError::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_coach_response("<response>  </response><category>Insult</category>"),
            Err(LlmError::MalformedResponse(_))
        ));
    }

    #[test]
    fn coach_round_trip() {
        let set = LabelSet::new([Trolling, SelfDeprecation, Entitlement]).unwrap();
        let r = parse_coach_response(&render_coach_xml(&set, "because")).unwrap();
        assert_eq!(r.labels, set);
        assert_eq!(r.rationale, "because");
    }

    #[test]
    fn reframe_canonical() {
        let r = parse_reframe_response("Detoxified: Please fix the loop bound. Rationale: removed the insult.").unwrap();
        assert_eq!(r.detoxified, "Please fix the loop bound.");
        assert_eq!(r.rationale, "removed the insult.");
    }

    #[test]
    fn reframe_semicolon_schema() {
        let r = parse_reframe_response("Detoxified: Please fix it; Rationale: softer").unwrap();
        assert_eq!(r.detoxified, "Please fix it");
        assert_eq!(r.rationale, "softer");
    }

    #[test]
    fn reframe_markdown_multiline() {
        let r = parse_reframe_response("**Detoxified:** line1\nline2\nRationale: r").unwrap();
        assert_eq!(r.detoxified, "line1\nline2");
        assert_eq!(r.rationale, "r");

        let r = parse_reframe_response("- **Detoxified**: a\n- **Rationale**: b").unwrap();
        assert_eq!(r.detoxified, "a");
        assert_eq!(r.rationale, "b");

        let r = parse_reframe_response("Analysis first.\n\nDETOXIFIED: x\n\nrationale: y\nmore").unwrap();
        assert_eq!(r.detoxified, "x");
        assert_eq!(r.rationale, "y\nmore");
    }

    #[test]
    fn reframe_errors() {
        for raw in ["Rationale: only", "Detoxified: text only", "Detoxified:   Rationale: r", "Detoxified: a Rationale:  ", ""] {
            assert!(
                matches!(parse_reframe_response(raw), Err(LlmError::MalformedResponse(_))),
                "{raw:?}"
            );
        }
    }

    #[test]
    fn reframe_round_trip() {
        let text = render_reframe_text("Could you add a test?", "Removed sarcasm.");
        let r = parse_reframe_response(&text).unwrap();
        assert_eq!((r.detoxified.as_str(), r.rationale.as_str()), ("Could you add a test?", "Removed sarcasm."));
    }
}
