//! Noise-elimination pipeline for social-media posts.
//!
//! Stages run in a fixed order: tokenize, emoticon conversion, hashtag
//! splitting, suffix stemming, cleaning. Lowercasing happens in the cleaning
//! stage so the hashtag splitter can still see capital letters.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

const DEFAULT_EMOJI_TSV: &str = include_str!("../resources/emoji.tsv");

/// Ordered preprocessed tokens of one post.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub source_id: String,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> TokenSequence {
        TokenSequence { source_id: source_id.into(), tokens }
    }

    pub fn from_words(words: &[&str]) -> TokenSequence {
        TokenSequence { source_id: String::new(), tokens: words.iter().map(|w| w.to_string()).collect() }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Emoji codepoint sequence to description tokens.
#[derive(Debug, Clone, Default)]
pub struct EmoticonMap {
    entries: BTreeMap<String, Vec<String>>,
}

impl EmoticonMap {
    /// Parses `codepoints(hex, space separated)<TAB>description` lines.
    pub fn from_tsv(content: &str) -> Result<EmoticonMap> {
        let mut entries = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (cps, desc) = line.split_once('\t').ok_or(Error::MalformedRow {
                line: i + 1,
                expected: 2,
                found: 1,
            })?;
            let mut key = String::new();
            for hex in cps.split_whitespace() {
                let c = u32::from_str_radix(hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or(Error::InvalidRecord { line: i + 1, reason: "bad codepoint" })?;
                key.push(c);
            }
            let words: Vec<String> = desc.split_whitespace().map(|w| w.to_string()).collect();
            if key.is_empty() || words.is_empty() {
                return Err(Error::InvalidRecord { line: i + 1, reason: "empty emoji entry" });
            }
            if entries.insert(key, words).is_some() {
                return Err(Error::InvalidRecord { line: i + 1, reason: "duplicate emoji entry" });
            }
        }
        Ok(EmoticonMap { entries })
    }

    /// The shipped map covering the standard emoji set.
    pub fn standard() -> EmoticonMap {
        EmoticonMap::from_tsv(DEFAULT_EMOJI_TSV).expect("shipped emoji table is well-formed")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up an emoji cluster, retrying without variation selectors and
    /// skin-tone modifiers.
    pub fn describe(&self, emoji: &str) -> Option<&[String]> {
        if let Some(d) = self.entries.get(emoji) {
            return Some(d);
        }
        let bare: String = emoji.chars().filter(|&c| !matches!(c, '\u{FE0F}' | '\u{FE0E}')).collect();
        if let Some(d) = self.entries.get(&bare) {
            return Some(d);
        }
        let plain: String = bare.chars().filter(|&c| !is_skin_tone(c)).collect();
        self.entries.get(&plain).map(Vec::as_slice)
    }
}

fn is_skin_tone(c: char) -> bool {
    ('\u{1F3FB}'..='\u{1F3FF}').contains(&c)
}

fn is_pictographic(c: char) -> bool {
    let u = c as u32;
    matches!(u,
        0x1F000..=0x1FAFF
        | 0x2300..=0x23FF
        | 0x2460..=0x24FF
        | 0x25A0..=0x27BF
        | 0x2900..=0x297F
        | 0x2B00..=0x2BFF
        | 0x2190..=0x21FF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0x00A9 | 0x00AE | 0x203C | 0x2049 | 0x2122 | 0x2139)
}

fn is_emoji_extender(c: char) -> bool {
    matches!(c, '\u{FE0F}' | '\u{FE0E}' | '\u{20E3}') || is_skin_tone(c) || ('\u{E0020}'..='\u{E007F}').contains(&c)
}

fn is_regional_indicator(c: char) -> bool {
    ('\u{1F1E6}'..='\u{1F1FF}').contains(&c)
}

/// Length in chars of the emoji cluster starting at `i`, if one does.
fn emoji_cluster_len(chars: &[char], i: usize) -> Option<usize> {
    let c = chars[i];
    let next = chars.get(i + 1).copied();
    if matches!(c, '0'..='9' | '#' | '*') {
        return match (next, chars.get(i + 2).copied()) {
            (Some('\u{20E3}'), _) => Some(2),
            (Some('\u{FE0F}'), Some('\u{20E3}')) => Some(3),
            _ => None,
        };
    }
    if is_regional_indicator(c) {
        return Some(if next.is_some_and(is_regional_indicator) { 2 } else { 1 });
    }
    if !is_pictographic(c) {
        return None;
    }
    let mut j = i + 1;
    loop {
        while j < chars.len() && is_emoji_extender(chars[j]) {
            j += 1;
        }
        if j + 1 < chars.len() && chars[j] == '\u{200D}' && is_pictographic(chars[j + 1]) {
            j += 2;
        } else {
            break;
        }
    }
    Some(j - i)
}

fn is_emoji_token(token: &str) -> bool {
    let chars: Vec<char> = token.chars().collect();
    !chars.is_empty() && emoji_cluster_len(&chars, 0) == Some(chars.len())
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{2013}' | '\u{2014}'
                | '\u{00AB}' | '\u{00BB}' | '\u{00A1}' | '\u{00BF}' | '\u{00B7}' | '\u{2022}'
        )
}

fn push_segment(segment: &[char], out: &mut Vec<String>) {
    let mut start = 0;
    let mut end = segment.len();
    while start < end && is_punct(segment[start]) {
        let hashtag = segment[start] == '#' && segment.get(start + 1).is_some_and(|c| c.is_alphanumeric());
        if hashtag {
            break;
        }
        out.push(segment[start].to_string());
        start += 1;
    }
    let mut trailing = Vec::new();
    while end > start && is_punct(segment[end - 1]) {
        trailing.push(segment[end - 1].to_string());
        end -= 1;
    }
    if start < end {
        out.push(segment[start..end].iter().collect());
    }
    out.extend(trailing.into_iter().rev());
}

/// Whitespace split; leading/trailing punctuation become single-char tokens,
/// `#hashtag` tokens and emoji clusters are kept whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut seg_start = 0;
        let mut i = 0;
        while i < chars.len() {
            match emoji_cluster_len(&chars, i) {
                Some(n) => {
                    push_segment(&chars[seg_start..i], &mut out);
                    out.push(chars[i..i + n].iter().collect());
                    i += n;
                    seg_start = i;
                }
                None => i += 1,
            }
        }
        push_segment(&chars[seg_start..], &mut out);
    }
    out
}

/// Replaces mapped emoji tokens by their description tokens.
pub fn convert_emoticons(tokens: Vec<String>, map: &EmoticonMap) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        match is_emoji_token(&tok).then(|| map.describe(&tok)).flatten() {
            Some(desc) => out.extend(desc.iter().cloned()),
            None => out.push(tok),
        }
    }
    out
}

/// Splits `#CamelCase2020` style hashtags at case and letter/digit
/// boundaries. Other tokens pass through unchanged.
pub fn split_hashtag(token: &str) -> Vec<String> {
    if token.is_empty() {
        return Vec::new();
    }
    let body = match token.strip_prefix('#') {
        Some(b) if b.chars().any(char::is_alphanumeric) => b,
        _ => return alloc::vec![token.to_string()],
    };
    let mut parts = Vec::new();
    let mut cur: Vec<char> = Vec::new();
    let flush = |cur: &mut Vec<char>, parts: &mut Vec<String>| {
        if !cur.is_empty() {
            parts.push(cur.drain(..).collect());
        }
    };
    for c in body.chars() {
        if !c.is_alphanumeric() {
            flush(&mut cur, &mut parts);
            continue;
        }
        if let Some(&prev) = cur.last() {
            let digit_edge = prev.is_numeric() != c.is_numeric();
            let camel = !prev.is_uppercase() && !prev.is_numeric() && c.is_uppercase();
            let acronym_end =
                prev.is_uppercase() && c.is_lowercase() && cur.len() >= 2 && cur[cur.len() - 2].is_uppercase();
            if digit_edge || camel {
                flush(&mut cur, &mut parts);
            } else if acronym_end {
                let head = cur.pop().expect("len checked");
                flush(&mut cur, &mut parts);
                cur.push(head);
            }
        }
        cur.push(c);
    }
    flush(&mut cur, &mut parts);
    parts
}

const MIN_STEM: usize = 3;

/// Strips one inflectional suffix (`ing`, `est`, `ed`, `s`) if the stem keeps
/// at least three characters. A doubled final consonant left behind by `ing`
/// or `ed` is undoubled (`stopped` -> `stop`), except for `l`, `s`, `z`.
pub fn stem(token: &str) -> String {
    let lower = token.to_lowercase();
    let chars: Vec<char> = token.chars().collect();
    if lower.chars().count() != chars.len() {
        return token.to_string();
    }
    for suffix in ["ing", "est", "ed", "s"] {
        if !lower.ends_with(suffix) {
            continue;
        }
        if suffix == "s" && lower.ends_with("ss") {
            return token.to_string();
        }
        let keep = chars.len() - suffix.len();
        if keep < MIN_STEM {
            return token.to_string();
        }
        let mut stem = &chars[..keep];
        if matches!(suffix, "ing" | "ed") && keep > MIN_STEM {
            let a = stem[keep - 1].to_ascii_lowercase();
            let b = stem[keep - 2].to_ascii_lowercase();
            if a == b && a.is_ascii_alphabetic() && !matches!(a, 'a' | 'e' | 'i' | 'o' | 'u' | 'l' | 's' | 'z') {
                stem = &stem[..keep - 1];
            }
        }
        return stem.iter().collect();
    }
    token.to_string()
}

fn clean_token(token: &str, keep_digits: bool) -> Option<String> {
    if !token.is_ascii() {
        return None;
    }
    let kept: String = token
        .chars()
        .filter(|c| c.is_ascii_alphabetic() || (keep_digits && c.is_ascii_digit()))
        .map(|c| c.to_ascii_lowercase())
        .collect();
    (!kept.is_empty()).then_some(kept)
}

/// Drops punctuation-only, digit-only and non-ASCII tokens, strips embedded
/// punctuation and digits from the rest, and lowercases.
pub fn clean(tokens: Vec<String>) -> Vec<String> {
    tokens.iter().filter_map(|t| clean_token(t, false)).collect()
}

/// Stage toggles. Every stage is on by default; `keep_hashtag_digits` is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub emoticons: bool,
    pub hashtags: bool,
    pub stemming: bool,
    pub cleaning: bool,
    pub keep_hashtag_digits: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { emoticons: true, hashtags: true, stemming: true, cleaning: true, keep_hashtag_digits: false }
    }
}

/// A pipeline configuration bound to an emoticon map.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PipelineConfig,
    emoticons: EmoticonMap,
}

impl Preprocessor {
    pub fn new(config: PipelineConfig) -> Preprocessor {
        Preprocessor { config, emoticons: EmoticonMap::standard() }
    }

    pub fn with_map(config: PipelineConfig, emoticons: EmoticonMap) -> Preprocessor {
        Preprocessor { config, emoticons }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn process(&self, text: &str, source_id: &str) -> TokenSequence {
        preprocess_pipeline(text, source_id, &self.config, &self.emoticons)
    }
}

/// Runs the enabled stages in order over one post.
pub fn preprocess_pipeline(text: &str, source_id: &str, config: &PipelineConfig, map: &EmoticonMap) -> TokenSequence {
    let mut tokens = tokenize(text);
    if config.emoticons {
        tokens = convert_emoticons(tokens, map);
    }
    // (token, came from a split hashtag)
    let mut tagged: Vec<(String, bool)> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        if config.hashtags && tok.starts_with('#') {
            tagged.extend(split_hashtag(&tok).into_iter().map(|t| (t, true)));
        } else {
            tagged.push((tok, false));
        }
    }
    if config.stemming {
        for (tok, _) in tagged.iter_mut() {
            *tok = stem(tok);
        }
    }
    let tokens = if config.cleaning {
        tagged
            .into_iter()
            .filter_map(|(t, from_hashtag)| clean_token(&t, config.keep_hashtag_digits && from_hashtag))
            .collect()
    } else {
        tagged.into_iter().map(|(t, _)| t).collect()
    };
    TokenSequence { source_id: source_id.to_string(), tokens }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_cases() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("labs in India: ICMR"), strs(&["labs", "in", "India", ":", "ICMR"]));
        assert_eq!(tokenize("#IndiaFightsCorona!"), strs(&["#IndiaFightsCorona", "!"]));
        assert_eq!(tokenize("(#covid)"), strs(&["(", "#covid", ")"]));
        assert_eq!(tokenize("mask😷on"), strs(&["mask", "😷", "on"]));
        assert_eq!(tokenize("😷😷"), strs(&["😷", "😷"]));
        assert_eq!(tokenize("COVID-19"), strs(&["COVID-19"]));
    }

    #[test]
    fn tokenize_keeps_zwj_and_modifier_clusters() {
        assert_eq!(tokenize("👍🏽ok"), strs(&["👍🏽", "ok"]));
        assert_eq!(tokenize("👩‍⚕️"), strs(&["👩‍⚕️"]));
        assert_eq!(tokenize("🇮🇳!"), strs(&["🇮🇳", "!"]));
    }

    #[test]
    fn emoticon_conversion() {
        let map = EmoticonMap::standard();
        assert!(map.len() > 3000);
        assert_eq!(
            convert_emoticons(strs(&["😷"]), &map),
            strs(&["face", "with", "medical", "mask", "emoji"])
        );
        assert_eq!(convert_emoticons(strs(&["covid"]), &map), strs(&["covid"]));
        let two = convert_emoticons(strs(&["😷", "👍"]), &map);
        let mut expected = strs(&["face", "with", "medical", "mask", "emoji"]);
        expected.extend(map.describe("👍").unwrap().iter().cloned());
        assert_eq!(two, expected);
        assert_eq!(
            convert_emoticons(strs(&["👍🏽"]), &map),
            strs(&["thumbs", "up", "medium", "skin", "tone", "emoji"])
        );
        // variation selector falls back to the base description
        assert_eq!(convert_emoticons(strs(&["😷\u{FE0F}"]), &map), strs(&["face", "with", "medical", "mask", "emoji"]));
    }

    #[test]
    fn unmapped_emoji_left_for_cleaning() {
        let map = EmoticonMap::from_tsv("1F637\tface with medical mask emoji\n").unwrap();
        assert_eq!(convert_emoticons(strs(&["🦠"]), &map), strs(&["🦠"]));
        assert!(clean(strs(&["🦠"])).is_empty());
    }

    #[test]
    fn emoji_table_errors() {
        assert!(EmoticonMap::from_tsv("zz\tbad\n").is_err());
        assert!(EmoticonMap::from_tsv("1F637\n").is_err());
        assert!(EmoticonMap::from_tsv("1F637\ta\n1F637\tb\n").is_err());
    }

    #[test]
    fn hashtag_splitting() {
        assert_eq!(split_hashtag("#IndiaFightsCorona"), strs(&["India", "Fights", "Corona"]));
        assert_eq!(split_hashtag("hello"), strs(&["hello"]));
        assert_eq!(split_hashtag("#Covid19India"), strs(&["Covid", "19", "India"]));
        assert_eq!(split_hashtag("#COVIDVaccine"), strs(&["COVID", "Vaccine"]));
        assert_eq!(split_hashtag("#stay_home"), strs(&["stay", "home"]));
        assert_eq!(split_hashtag("#"), strs(&["#"]));
    }

    #[test]
    fn stemming() {
        assert_eq!(stem("confirmed"), "confirm");
        assert_eq!(stem("go"), "go");
        assert_eq!(stem("testing"), "test");
        assert_eq!(stem("labs"), "lab");
        assert_eq!(stem("Fights"), "Fight");
        assert_eq!(stem("is"), "is");
        assert_eq!(stem("stopped"), "stop");
        assert_eq!(stem("running"), "run");
        assert_eq!(stem("killed"), "kill");
        assert_eq!(stem("largest"), "larg");
        assert_eq!(stem("test"), "test");
        assert_eq!(stem("class"), "class");
    }

    #[test]
    fn cleaning() {
        assert!(clean(strs(&["!", ":"])).is_empty());
        assert_eq!(clean(strs(&["ICMR", "1000"])), strs(&["icmr"]));
        assert_eq!(clean(strs(&["India"])), strs(&["india"]));
        assert_eq!(clean(strs(&["COVID-19", "café", "U.S"])), strs(&["covid", "us"]));
    }

    #[test]
    fn pipeline_golden() {
        let pre = Preprocessor::new(PipelineConfig::default());
        assert_eq!(pre.process("#IndiaFightsCorona", "x").tokens, strs(&["india", "fight", "corona"]));
        assert!(pre.process("", "x").is_empty());
        assert_eq!(
            pre.process("1000 COVID-19 testing labs in India: ICMR", "x").tokens,
            strs(&["covid", "test", "lab", "in", "india", "icmr"])
        );
        assert_eq!(pre.process("stay safe 😷", "x").tokens, strs(&["stay", "safe", "face", "with", "medical", "mask", "emoji"]));
    }

    #[test]
    fn pipeline_toggles() {
        let keep = PipelineConfig { keep_hashtag_digits: true, ..PipelineConfig::default() };
        let pre = Preprocessor::new(keep);
        assert_eq!(pre.process("#Covid19India 2020", "x").tokens, strs(&["covid", "19", "india"]));
        let off = PipelineConfig { emoticons: false, hashtags: false, stemming: false, cleaning: false, keep_hashtag_digits: false };
        let pre = Preprocessor::new(off);
        assert_eq!(pre.process("#IndiaFights labs 😷!", "x").tokens, strs(&["#IndiaFights", "labs", "😷", "!"]));
        let no_stem = PipelineConfig { stemming: false, ..PipelineConfig::default() };
        assert_eq!(Preprocessor::new(no_stem).process("testing labs", "x").tokens, strs(&["testing", "labs"]));
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(tokens in proptest::collection::vec("\\PC{0,8}", 0..8)) {
            let once = clean(tokens);
            prop_assert_eq!(clean(once.clone()), once);
        }

        #[test]
        fn pipeline_emits_lowercase_ascii_letters(text in "\\PC{0,60}") {
            let pre = Preprocessor::new(PipelineConfig::default());
            for tok in pre.process(&text, "p").tokens {
                prop_assert!(!tok.is_empty());
                prop_assert!(tok.chars().all(|c| c.is_ascii_lowercase()));
            }
        }

        #[test]
        fn hashtag_parts_never_empty(tag in "#?[A-Za-z0-9_]{0,12}") {
            for part in split_hashtag(&tag) {
                prop_assert!(!part.is_empty());
            }
        }

        #[test]
        fn tokens_have_no_whitespace(text in "\\PC{0,60}") {
            for tok in tokenize(&text) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
            }
        }
    }

    #[test]
    fn disabled_stages_are_identity() {
        let map = EmoticonMap::standard();
        let text = "#BigNews: 3 labs confirmed 😷";
        let all_off = PipelineConfig { emoticons: false, hashtags: false, stemming: false, cleaning: false, keep_hashtag_digits: false };
        assert_eq!(preprocess_pipeline(text, "", &all_off, &map).tokens, tokenize(text));
        let only_clean = PipelineConfig { cleaning: true, ..all_off };
        assert_eq!(preprocess_pipeline(text, "", &only_clean, &map).tokens, clean(tokenize(text)));
    }
}
