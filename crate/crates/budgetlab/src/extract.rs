//! Answer extraction from (possibly truncated) model text, normalization,
//! equivalence classes for voting, and natural-stop detection.
//!
//! The extraction pipeline tries, in fixed order: the last balanced
//! `\boxed{...}` directive, the last `####` marker, the last
//! "final answer" phrase, and finally the last bare number (numeric
//! convention only). Truncated text is the common case, so the boxed
//! scanner tolerates one unclosed brace at end of text.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pipeline level produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    Boxed,
    Gsm8kMarker,
    FinalAnswerPhrase,
    LastNumber,
    None,
}

impl ExtractionMethod {
    /// True for levels that carry an explicit final-answer marker
    /// (everything except the bare-number fallback).
    pub fn is_explicit_marker(self) -> bool {
        matches!(
            self,
            ExtractionMethod::Boxed | ExtractionMethod::Gsm8kMarker | ExtractionMethod::FinalAnswerPhrase
        )
    }

    /// True when the answer came from a fallback level (or none at all),
    /// which the strengthened extraction variant retries on.
    pub fn is_fallback(self) -> bool {
        matches!(self, ExtractionMethod::LastNumber | ExtractionMethod::None)
    }
}

/// Answer-format convention of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerConvention {
    /// Gold answers are numeric; the last-number fallback applies.
    Numeric,
    /// Gold answers may be symbolic LaTeX; the bare-number fallback is
    /// skipped so a stray intermediate value is not mistaken for an answer.
    LatexMath,
}

/// Result of running the extraction pipeline over one text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedAnswer {
    /// Canonical (normalized) answer; absent iff `method` is `None`.
    pub value: Option<String>,
    /// Source substring the value was normalized from.
    pub raw_span: Option<String>,
    pub method: ExtractionMethod,
}

impl ExtractedAnswer {
    pub fn none() -> Self {
        ExtractedAnswer { value: None, raw_span: None, method: ExtractionMethod::None }
    }

    fn found(method: ExtractionMethod, raw_span: &str) -> Option<Self> {
        let value = normalize_answer(raw_span);
        if value.is_empty() {
            return None;
        }
        Some(ExtractedAnswer {
            value: Some(value),
            raw_span: Some(raw_span.to_string()),
            method,
        })
    }

    pub fn is_some(&self) -> bool {
        self.value.is_some()
    }
}

/// How a generation stopped relative to its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Natural,
    BudgetHit,
}

/// Natural-stop signal for one generation.
///
/// `natural` means the generation terminated before exhausting its cap
/// (`tokens_generated < budget`); the strict variant additionally requires
/// staying under `strict_threshold * budget` (default 0.95).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopSignal {
    pub tokens_generated: u64,
    pub budget: u64,
    pub stop_reason: StopReason,
    pub strict: bool,
    pub has_final_marker: bool,
    pub strict_threshold: f64,
}

impl StopSignal {
    pub fn is_natural(&self) -> bool {
        self.stop_reason == StopReason::Natural
    }

    pub fn with_final_marker(mut self, has_marker: bool) -> Self {
        self.has_final_marker = has_marker;
        self
    }
}

/// Default strict natural-stop threshold (fraction of budget).
pub const DEFAULT_STRICT_THRESHOLD: f64 = 0.95;

/// Classify a stop event. Rejects `tokens_generated > budget`.
pub fn detect_natural_stop(tokens_generated: u64, budget: u64, strict_threshold: f64) -> Result<StopSignal> {
    if tokens_generated > budget {
        return Err(Error::InvalidInput(format!(
            "tokens_generated {tokens_generated} exceeds budget {budget}"
        )));
    }
    if !(strict_threshold > 0.0 && strict_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "strict_threshold must be in (0,1], got {strict_threshold}"
        )));
    }
    let natural = tokens_generated < budget;
    let strict = (tokens_generated as f64) < strict_threshold * budget as f64;
    Ok(StopSignal {
        tokens_generated,
        budget,
        stop_reason: if natural { StopReason::Natural } else { StopReason::BudgetHit },
        strict: natural && strict,
        has_final_marker: false,
        strict_threshold,
    })
}

static GSM8K_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"####\s*([^\n]*)").unwrap());
static FINAL_ANSWER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)final\s+answer(?:\s+is)?\s*:?\s*([^\n]+)").unwrap());
// Signed decimal with optional thousands separators and optional leading
// currency symbol; scientific notation deliberately excluded.
static NUMBER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[-−]?[$€£]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?").unwrap());
static LATEX_SPACING: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\\(?:[,;:! ]|quad\b|qquad\b)").unwrap());
static FRAC: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\\d?frac\{(-?\d+)\}\{(-?\d+)\}$").unwrap());
static PLAIN_FRACTION: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(-?\d+)\s*/\s*(-?\d+)$").unwrap());
static INT_WITH_SEPARATORS: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^-?\d{1,3}(,\d{3})+(\.\d+)?$").unwrap());

/// Multi-level answer extraction. Total: never errors, returns
/// `method = None` when every level fails.
pub fn extract_answer(text: &str, convention: AnswerConvention) -> ExtractedAnswer {
    if text.is_empty() {
        return ExtractedAnswer::none();
    }
    if let Some(span) = last_boxed_content(text) {
        if let Some(ans) = ExtractedAnswer::found(ExtractionMethod::Boxed, &span) {
            return ans;
        }
    }
    if let Some(caps) = GSM8K_MARKER.captures_iter(text).last() {
        let span = caps.get(1).map(|m| m.as_str().trim()).unwrap_or("");
        if let Some(ans) = ExtractedAnswer::found(ExtractionMethod::Gsm8kMarker, span) {
            return ans;
        }
    }
    if let Some(caps) = FINAL_ANSWER.captures_iter(text).last() {
        let span = caps.get(1).map(|m| m.as_str().trim()).unwrap_or("");
        if let Some(ans) = ExtractedAnswer::found(ExtractionMethod::FinalAnswerPhrase, span) {
            return ans;
        }
    }
    if convention == AnswerConvention::Numeric {
        if let Some(m) = NUMBER.find_iter(text).last() {
            if let Some(ans) = ExtractedAnswer::found(ExtractionMethod::LastNumber, m.as_str()) {
                return ans;
            }
        }
    }
    ExtractedAnswer::none()
}

/// Content of the last `\boxed{...}` directive, scanning balanced braces
/// and tolerating one unclosed brace when the text was truncated.
fn last_boxed_content(text: &str) -> Option<String> {
    let needle = "\\boxed{";
    let start = text.rfind(needle)?;
    let body = &text[start + needle.len()..];
    let mut depth = 1usize;
    let mut end = body.len();
    for (i, c) in body.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    end = i;
                    break;
                }
            }
            _ => {}
        }
    }
    // depth > 1 means more than one brace is missing; treat as too mangled.
    if depth > 1 {
        return None;
    }
    Some(body[..end].to_string())
}

/// Canonicalize an answer span. Deterministic and idempotent: strips
/// whitespace, LaTeX spacing commands, math-mode dollar delimiters, a
/// leading currency symbol, trailing periods, and thousands separators in
/// integers; reduces simple integer fractions to lowest terms. Any other
/// LaTeX is left untouched.
pub fn normalize_answer(raw: &str) -> String {
    let mut s = raw.trim().replace('−', "-");
    s = LATEX_SPACING.replace_all(&s, "").to_string();
    s = s.trim().to_string();
    // surrounding $...$ math-mode delimiters
    while s.len() >= 2 && s.starts_with('$') && s.ends_with('$') {
        s = s[1..s.len() - 1].trim().to_string();
    }
    // leading currency symbol directly before a digit ("$18", "-$18")
    for sym in ["$", "€", "£"] {
        let (neg, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.as_str()),
        };
        if let Some(stripped) = rest.strip_prefix(sym) {
            if stripped.starts_with(|c: char| c.is_ascii_digit()) {
                s = if neg { format!("-{stripped}") } else { stripped.to_string() };
            }
        }
    }
    while s.ends_with('.') && !s.ends_with("..") {
        s.pop();
        s = s.trim_end().to_string();
    }
    if INT_WITH_SEPARATORS.is_match(&s) {
        s = s.replace(',', "");
    }
    if let Some(caps) = FRAC.captures(&s) {
        if let Some(reduced) = reduce_fraction(&caps[1], &caps[2], true) {
            s = reduced;
        }
    } else if let Some(caps) = PLAIN_FRACTION.captures(&s) {
        if let Some(reduced) = reduce_fraction(&caps[1], &caps[2], false) {
            s = reduced;
        }
    }
    s
}

fn reduce_fraction(num: &str, den: &str, latex: bool) -> Option<String> {
    let n: i64 = num.parse().ok()?;
    let d: i64 = den.parse().ok()?;
    if d == 0 {
        return None;
    }
    let g = num_integer::gcd(n, d);
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    Some(if d == 1 {
        n.to_string()
    } else if latex {
        format!("\\frac{{{n}}}{{{d}}}")
    } else {
        format!("{n}/{d}")
    })
}

/// Exact rational representation of a numeric answer, when it fits i128.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rational {
    num: i128,
    den: i128,
}

fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some(caps) = FRAC.captures(s).or_else(|| PLAIN_FRACTION.captures(s)) {
        let num: i128 = caps[1].parse().ok()?;
        let den: i128 = caps[2].parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(reduce(Rational { num, den }));
    }
    // plain integer or decimal
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let mut parts = body.splitn(2, '.');
    let int_part = parts.next().unwrap_or("");
    let frac_part = parts.next().unwrap_or("");
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if frac_part.len() > 24 || int_part.len() > 24 {
        return None; // fall back to float comparison
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let den = 10i128.checked_pow(frac_part.len() as u32)?;
    let num = if neg { -num } else { num };
    Some(reduce(Rational { num, den }))
}

fn reduce(r: Rational) -> Rational {
    let g = num_integer::gcd(r.num, r.den);
    let (mut num, mut den) = (r.num / g, r.den / g);
    if den < 0 {
        num = -num;
        den = -den;
    }
    Rational { num, den }
}

/// Equivalence of two normalized answers: byte equality, or numeric
/// equality when both parse as rationals/decimals (exact when both fit an
/// i128 rational; otherwise 1e-9 relative tolerance on floats).
pub fn answers_equivalent(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (parse_rational(a), parse_rational(b)) {
        (Some(x), Some(y)) => x == y,
        _ => match (parse_float(a), parse_float(b)) {
            (Some(x), Some(y)) => {
                let scale = x.abs().max(y.abs());
                if scale == 0.0 {
                    x == y
                } else {
                    (x - y).abs() <= 1e-9 * scale
                }
            }
            _ => false,
        },
    }
}

fn parse_float(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(caps) = FRAC.captures(s).or_else(|| PLAIN_FRACTION.captures(s)) {
        let num: f64 = caps[1].parse().ok()?;
        let den: f64 = caps[2].parse().ok()?;
        if den == 0.0 {
            return None;
        }
        return Some(num / den);
    }
    // reject exponent forms; the answer lexeme excludes scientific notation
    if s.contains(['e', 'E']) {
        return None;
    }
    s.parse().ok()
}
