//! L-systems over the turtle alphabet `F G + - ' '`.
//!
//! Rewriting keeps a per-symbol step length alongside each symbol. Symbols
//! parsed from text have length 1; when a forward symbol is rewritten, its
//! replacement is scaled so that the rule's net displacement spans exactly the
//! parent step. Growth therefore happens in place: `G` segments keep their
//! size, `F` segments sprout, and the global outline of a shape-preserving
//! system is the same at every depth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LsysError;
use crate::geometry::{segments_intersect, Point};

/// Default cap on the number of (non-separator) symbols in any expansion.
pub const MAX_SYMBOLS: usize = 512;

/// Deepest recursion depth used anywhere in the model.
pub const MAX_DEPTH: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    /// Growable forward step.
    F,
    /// Inert forward step.
    G,
    /// Clockwise turn.
    Plus,
    /// Counter-clockwise turn.
    Minus,
    /// No-op separator.
    Space,
}

impl Symbol {
    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            'F' => Some(Symbol::F),
            'G' => Some(Symbol::G),
            '+' => Some(Symbol::Plus),
            '-' | '\u{2212}' => Some(Symbol::Minus),
            ' ' => Some(Symbol::Space),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::F => 'F',
            Symbol::G => 'G',
            Symbol::Plus => '+',
            Symbol::Minus => '-',
            Symbol::Space => ' ',
        }
    }

    pub fn is_forward(self) -> bool {
        matches!(self, Symbol::F | Symbol::G)
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Symbol::Plus | Symbol::Minus)
    }

    /// Compact code used for hashing rule strings.
    pub fn code(self) -> u8 {
        match self {
            Symbol::F => 0,
            Symbol::G => 1,
            Symbol::Plus => 2,
            Symbol::Minus => 3,
            Symbol::Space => 4,
        }
    }
}

/// A sequence of turtle symbols with a step length per symbol.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SymbolString {
    symbols: Vec<Symbol>,
    steps: Vec<f64>,
}

impl SymbolString {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit-step string from symbols.
    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        let steps = vec![1.0; symbols.len()];
        SymbolString { symbols, steps }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Step length for each symbol (meaningful for forward symbols only).
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn get(&self, index: usize) -> Option<Symbol> {
        self.symbols.get(index).copied()
    }

    pub fn push(&mut self, symbol: Symbol, step: f64) {
        self.symbols.push(symbol);
        self.steps.push(step);
    }

    /// Number of symbols, separators excluded.
    pub fn len(&self) -> usize {
        self.symbols.iter().filter(|s| **s != Symbol::Space).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of stored symbols, separators included.
    pub fn raw_len(&self) -> usize {
        self.symbols.len()
    }

    pub fn count_f(&self) -> usize {
        self.count(Symbol::F)
    }

    pub fn count_g(&self) -> usize {
        self.count(Symbol::G)
    }

    pub fn count_forward(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_forward()).count()
    }

    pub fn count_turns(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_turn()).count()
    }

    fn count(&self, symbol: Symbol) -> usize {
        self.symbols.iter().filter(|s| **s == symbol).count()
    }

    /// Positions of all forward symbols, in order.
    pub fn forward_positions(&self) -> Vec<usize> {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_forward())
            .map(|(i, _)| i)
            .collect()
    }

    /// True when two forward symbols follow each other, ignoring separators.
    pub fn has_adjacent_forwards(&self) -> bool {
        let mut previous_forward = false;
        for s in self.symbols.iter().filter(|s| **s != Symbol::Space) {
            if s.is_forward() && previous_forward {
                return true;
            }
            previous_forward = s.is_forward();
        }
        false
    }

    /// Symbol codes, used as compact hash keys.
    pub fn codes(&self) -> Vec<u8> {
        self.symbols.iter().map(|s| s.code()).collect()
    }

    /// Turtle displacement of this string traced from the origin with a
    /// rightward heading, together with the net heading change in degrees.
    pub fn displacement(&self, angle_deg: f64) -> (Point, f64) {
        let mut heading = 0.0f64;
        let mut pos = Point::new(0.0, 0.0);
        for (s, step) in self.symbols.iter().zip(&self.steps) {
            match s {
                Symbol::F | Symbol::G => {
                    let r = heading.to_radians();
                    pos = Point::new(pos.x + step * r.cos(), pos.y + step * r.sin());
                }
                Symbol::Minus => heading += angle_deg,
                Symbol::Plus => heading -= angle_deg,
                Symbol::Space => {}
            }
        }
        (pos, heading)
    }

    /// Replaces the symbol at `index`, keeping its step length.
    fn with_symbol(&self, index: usize, symbol: Symbol) -> SymbolString {
        let mut out = self.clone();
        out.symbols[index] = symbol;
        out
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for SymbolString {
    type Err = LsysError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let symbols = text
            .chars()
            .enumerate()
            .map(|(i, c)| Symbol::from_char(c).ok_or(LsysError::InvalidSymbol { ch: c, position: i }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SymbolString::from_symbols(symbols))
    }
}

impl Serialize for SymbolString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A concept type: axiom, turn angle and rewrite rules for `F` and `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LSystem {
    pub axiom: SymbolString,
    pub angle_deg: f64,
    pub f_rule: SymbolString,
    #[serde(default = "default_g_rule")]
    pub g_rule: SymbolString,
}

fn default_g_rule() -> SymbolString {
    SymbolString::from_symbols(vec![Symbol::G])
}

impl LSystem {
    /// System with axiom `F` and the persistent `G -> G` rule.
    pub fn new(f_rule: SymbolString, angle_deg: f64) -> Self {
        LSystem {
            axiom: SymbolString::from_symbols(vec![Symbol::F]),
            angle_deg,
            f_rule,
            g_rule: default_g_rule(),
        }
    }

    /// Parses `f_rule` and builds a system with the default axiom and g-rule.
    pub fn from_rule(f_rule: &str, angle_deg: f64) -> Result<Self, LsysError> {
        Ok(LSystem::new(f_rule.parse()?, angle_deg))
    }

    pub fn validate(&self) -> Result<(), LsysError> {
        if self.f_rule.count_forward() == 0 {
            return Err(LsysError::RuleWithoutForward);
        }
        if !self.angle_deg.is_finite() {
            return Err(LsysError::InvalidAngle(self.angle_deg));
        }
        Ok(())
    }

    /// Same system with a different f-rule (angle, axiom and g-rule kept).
    pub fn with_f_rule(&self, f_rule: SymbolString) -> LSystem {
        LSystem { f_rule, ..self.clone() }
    }
}

/// Length of the chord a rule spans; a closed rule spans nothing and is
/// left unscaled.
fn rule_span(rule: &SymbolString, angle_deg: f64) -> f64 {
    let (d, _) = rule.displacement(angle_deg);
    let span = d.norm();
    if span > 1e-9 {
        span
    } else {
        1.0
    }
}

/// Length of the string `expand_once` would produce, separators excluded.
pub fn expanded_len(s: &SymbolString, l: &LSystem) -> usize {
    let f = l.f_rule.len();
    let g = l.g_rule.len();
    s.symbols()
        .iter()
        .map(|sym| match sym {
            Symbol::F => f,
            Symbol::G => g,
            Symbol::Space => 0,
            _ => 1,
        })
        .sum()
}

/// One parallel rewriting pass with the default symbol cap.
pub fn expand_once(s: &SymbolString, l: &LSystem) -> Result<SymbolString, LsysError> {
    expand_once_capped(s, l, MAX_SYMBOLS)
}

/// One parallel rewriting pass; fails if the result would exceed `cap`.
pub fn expand_once_capped(s: &SymbolString, l: &LSystem, cap: usize) -> Result<SymbolString, LsysError> {
    let len = expanded_len(s, l);
    if len > cap {
        return Err(LsysError::CapExceeded { len, cap, depth: None });
    }
    let f_span = rule_span(&l.f_rule, l.angle_deg);
    let g_span = rule_span(&l.g_rule, l.angle_deg);
    let mut out = SymbolString {
        symbols: Vec::with_capacity(s.raw_len() + len),
        steps: Vec::with_capacity(s.raw_len() + len),
    };
    for (sym, step) in s.symbols.iter().zip(&s.steps) {
        let (rule, span) = match sym {
            Symbol::F => (&l.f_rule, f_span),
            Symbol::G => (&l.g_rule, g_span),
            _ => {
                out.push(*sym, *step);
                continue;
            }
        };
        for (child, child_step) in rule.symbols.iter().zip(&rule.steps) {
            out.push(*child, step * child_step / span);
        }
    }
    Ok(out)
}

/// `S_d`: the axiom rewritten `depth` times.
pub fn expand_to_depth(l: &LSystem, depth: u8) -> Result<SymbolString, LsysError> {
    expand_to_depth_capped(l, depth, MAX_SYMBOLS)
}

pub fn expand_to_depth_capped(l: &LSystem, depth: u8, cap: usize) -> Result<SymbolString, LsysError> {
    let mut s = l.axiom.clone();
    if s.len() > cap {
        return Err(LsysError::CapExceeded { len: s.len(), cap, depth: Some(0) });
    }
    for d in 1..=depth {
        s = expand_once_capped(&s, l, cap).map_err(|e| match e {
            LsysError::CapExceeded { len, cap, .. } => LsysError::CapExceeded { len, cap, depth: Some(d) },
            other => other,
        })?;
    }
    Ok(s)
}

/// All legal expansions `S_0..=S_k` where `k <= max_depth` is the deepest one
/// within the cap. Empty only if the axiom itself exceeds the cap.
pub fn expansions(l: &LSystem, max_depth: u8, cap: usize) -> Vec<SymbolString> {
    let mut out = Vec::with_capacity(max_depth as usize + 1);
    if l.axiom.len() > cap {
        return out;
    }
    out.push(l.axiom.clone());
    for _ in 0..max_depth {
        match expand_once_capped(out.last().unwrap(), l, cap) {
            Ok(next) => out.push(next),
            Err(_) => break,
        }
    }
    out
}

/// Swaps `F` and `G` at `index`.
pub fn toggle_segment(s: &SymbolString, index: usize) -> Result<SymbolString, LsysError> {
    match s.get(index) {
        Some(Symbol::F) => Ok(s.with_symbol(index, Symbol::G)),
        Some(Symbol::G) => Ok(s.with_symbol(index, Symbol::F)),
        Some(other) => Err(LsysError::NotAForwardSymbol { index, found: Some(other.as_char()) }),
        None => Err(LsysError::NotAForwardSymbol { index, found: None }),
    }
}

/// Sets every forward symbol of `s` to `F` where `active` is true and `G`
/// otherwise. `active` has one entry per forward symbol, in order.
pub fn assign_forwards(s: &SymbolString, active: &[bool]) -> Result<SymbolString, LsysError> {
    let positions = s.forward_positions();
    if positions.len() != active.len() {
        return Err(LsysError::AssignmentLength { expected: positions.len(), found: active.len() });
    }
    let mut out = s.clone();
    for (&p, &on) in positions.iter().zip(active) {
        out.symbols[p] = if on { Symbol::F } else { Symbol::G };
    }
    Ok(out)
}

/// Outcome of the stimulus checks; every flag true means the system is an
/// admissible stimulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub upward_growth: bool,
    pub non_self_crossing: bool,
    pub no_adjacent_forwards: bool,
    pub shape_preserving: bool,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.upward_growth && self.non_self_crossing && self.no_adjacent_forwards && self.shape_preserving
    }

    /// Name of the first failing check.
    pub fn first_failure(&self) -> Option<&'static str> {
        if !self.shape_preserving {
            Some("shape-preservation")
        } else if !self.no_adjacent_forwards {
            Some("no-adjacent-forwards")
        } else if !self.upward_growth {
            Some("upward-growth")
        } else if !self.non_self_crossing {
            Some("non-self-crossing")
        } else {
            None
        }
    }
}

const GEOM_TOL: f64 = 1e-9;

/// Net heading change is a multiple of 360 degrees and the rule's chord
/// points along the initial heading.
pub fn is_shape_preserving(l: &LSystem) -> bool {
    let (d, heading) = l.f_rule.displacement(l.angle_deg);
    let turns = heading / 360.0;
    let whole_turns = (turns - turns.round()).abs() < 1e-9;
    let scale = l.f_rule.count_forward().max(1) as f64;
    whole_turns && d.x > GEOM_TOL * scale && d.y.abs() <= 1e-9 * scale
}

/// Checks the stimulus constraints on the depth-2 trajectory.
pub fn validate_stimulus_constraints(l: &LSystem) -> ConstraintReport {
    let shape_preserving = is_shape_preserving(l);
    let no_adjacent_forwards = !l.f_rule.has_adjacent_forwards();
    let segments = match expand_to_depth(l, 2) {
        Ok(s2) => crate::render::trace_raw(&s2, l.angle_deg).segments,
        Err(_) => {
            return ConstraintReport {
                upward_growth: false,
                non_self_crossing: false,
                no_adjacent_forwards,
                shape_preserving,
            }
        }
    };
    let points: Vec<Point> = segments.iter().flat_map(|s| [s.start, s.end]).collect();
    let upward_growth = match (segments.first(), segments.last()) {
        (Some(first), Some(last)) => grows_upward(first.start, last.end, &points),
        _ => false,
    };
    let non_self_crossing = !has_self_crossing(&segments);
    ConstraintReport { upward_growth, non_self_crossing, no_adjacent_forwards, shape_preserving }
}

/// Every point lies on or above (left of) the start-to-end chord and some
/// point lies strictly above it.
fn grows_upward(start: Point, end: Point, points: &[Point]) -> bool {
    let chord = end - start;
    let len = chord.norm();
    if len < GEOM_TOL {
        return false;
    }
    let mut highest = f64::NEG_INFINITY;
    for p in points {
        let h = chord.cross(*p - start) / len;
        if h < -1e-7 * len {
            return false;
        }
        highest = highest.max(h);
    }
    highest > 1e-7 * len
}

/// Any two non-consecutive segments touching, or consecutive segments
/// overlapping beyond their shared endpoint.
fn has_self_crossing(segments: &[crate::render::Segment]) -> bool {
    for i in 0..segments.len() {
        for j in (i + 1)..segments.len() {
            let (a, b) = (&segments[i], &segments[j]);
            if j == i + 1 {
                // Shared joint is expected; a reversal retraces the previous leg.
                let u = a.end - a.start;
                let v = b.end - b.start;
                if u.cross(v).abs() <= 1e-9 * u.norm() * v.norm() && u.dot(v) < 0.0 {
                    return true;
                }
                continue;
            }
            if segments_intersect(a.start, a.end, b.start, b.end) {
                return true;
            }
        }
    }
    false
}
