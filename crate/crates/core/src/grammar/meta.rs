use std::collections::HashMap;
use std::fmt;

use crate::error::GrammarError;
use crate::lsystem::{Symbol, SymbolString};

/// Name every grammar must use for its start nonterminal.
pub const START: &str = "Start";

/// One element of a production's right-hand side.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Item {
    Terminal(Vec<Symbol>),
    Nonterminal(u16),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Production {
    pub items: Vec<Item>,
}

impl Production {
    pub fn nonterminals(&self) -> impl Iterator<Item = u16> + '_ {
        self.items.iter().filter_map(|i| match i {
            Item::Nonterminal(n) => Some(*n),
            Item::Terminal(_) => None,
        })
    }

    pub fn arity(&self) -> usize {
        self.nonterminals().count()
    }
}

/// A PCFG over F-rules with uniform choice among each nonterminal's
/// productions, plus a uniform choice of turn angle.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaGrammar {
    names: Vec<String>,
    productions: Vec<Vec<Production>>,
    angles: Vec<f64>,
    axiom: SymbolString,
    g_rule: SymbolString,
}

impl MetaGrammar {
    /// Builds and validates a grammar. `rules` pairs each nonterminal name
    /// with its alternatives; `Start` must be among them.
    pub fn new(
        rules: Vec<(String, Vec<Vec<RawItem>>)>,
        angles: Vec<f64>,
        axiom: SymbolString,
        g_rule: SymbolString,
    ) -> Result<Self, GrammarError> {
        let mut index: HashMap<String, u16> = HashMap::new();
        let mut names = Vec::new();
        // Start gets index 0.
        if !rules.iter().any(|(n, _)| n == START) {
            return Err(GrammarError::Invalid(format!("no productions for {START}")));
        }
        index.insert(START.to_string(), 0);
        names.push(START.to_string());
        for (name, _) in &rules {
            if !index.contains_key(name) {
                index.insert(name.clone(), names.len() as u16);
                names.push(name.clone());
            }
        }
        let mut productions = vec![Vec::new(); names.len()];
        for (name, alts) in rules {
            let nt = index[&name] as usize;
            for alt in alts {
                let mut items = Vec::with_capacity(alt.len());
                for raw in alt {
                    match raw {
                        RawItem::Terminal(t) if t.is_empty() => {}
                        RawItem::Terminal(t) => items.push(Item::Terminal(t)),
                        RawItem::Name(n) => match index.get(&n) {
                            Some(&i) => items.push(Item::Nonterminal(i)),
                            None => return Err(GrammarError::Invalid(format!("{n} has no productions"))),
                        },
                    }
                }
                productions[nt].push(Production { items });
            }
        }
        if angles.is_empty() {
            return Err(GrammarError::Invalid("angle set is empty".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(GrammarError::Invalid("angles must be finite".into()));
        }
        let g = MetaGrammar { names, productions, angles, axiom, g_rule };
        g.check_productive()?;
        Ok(g)
    }

    /// Every nonterminal must have a production and derive some terminal
    /// string; otherwise sampling could fail to terminate.
    fn check_productive(&self) -> Result<(), GrammarError> {
        for (nt, prods) in self.productions.iter().enumerate() {
            if prods.is_empty() {
                return Err(GrammarError::Invalid(format!("{} has no productions", self.names[nt])));
            }
        }
        let mut productive = vec![false; self.names.len()];
        loop {
            let mut changed = false;
            for nt in 0..self.names.len() {
                if !productive[nt]
                    && self.productions[nt].iter().any(|p| p.nonterminals().all(|c| productive[c as usize]))
                {
                    productive[nt] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        match productive.iter().position(|p| !p) {
            Some(nt) => Err(GrammarError::Invalid(format!("{} derives no terminal string", self.names[nt]))),
            None => Ok(()),
        }
    }

    /// Same productions over a different angle set.
    pub fn with_angles(&self, angles: Vec<f64>) -> Result<Self, GrammarError> {
        if angles.is_empty() {
            return Err(GrammarError::Invalid("angle set is empty".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(GrammarError::Invalid("angles must be finite".into()));
        }
        Ok(MetaGrammar { angles, ..self.clone() })
    }

    pub fn nonterminal_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, nt: u16) -> &str {
        &self.names[nt as usize]
    }

    pub fn productions(&self, nt: u16) -> &[Production] {
        &self.productions[nt as usize]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn axiom(&self) -> &SymbolString {
        &self.axiom
    }

    pub fn g_rule(&self) -> &SymbolString {
        &self.g_rule
    }

    pub fn angle_index(&self, angle_deg: f64) -> Option<usize> {
        self.angles.iter().position(|a| (a - angle_deg).abs() < 1e-9)
    }

    pub fn log_angle_prob(&self) -> f64 {
        -(self.angles.len() as f64).ln()
    }

    /// Log-probability of choosing any one production of `nt`.
    pub fn log_choice(&self, nt: u16) -> f64 {
        -(self.productions[nt as usize].len() as f64).ln()
    }

    /// Parses the grammar file format; see [`MetaGrammar::to_text`].
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut rules: Vec<(String, Vec<Vec<RawItem>>)> = Vec::new();
        let mut angles = None;
        let mut axiom = SymbolString::from_symbols(vec![Symbol::F]);
        let mut g_rule = SymbolString::from_symbols(vec![Symbol::G]);
        let mut raw_lines = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("angles:") {
                let parsed = rest
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| GrammarError::Syntax { line: line_no, message: format!("bad angle: {e}") })?;
                angles = Some(parsed);
            } else if let Some(rest) = line.strip_prefix("axiom:") {
                axiom = parse_terminal_field(rest, line_no)?;
            } else if let Some(rest) = line.strip_prefix("g_rule:") {
                g_rule = parse_terminal_field(rest, line_no)?;
            } else {
                let (lhs, rhs) = line.split_once("->").ok_or_else(|| GrammarError::Syntax {
                    line: line_no,
                    message: "expected `NAME -> alternative | ...`".into(),
                })?;
                let lhs = lhs.trim();
                if !is_nonterminal_name(lhs) {
                    return Err(GrammarError::Syntax { line: line_no, message: format!("bad nonterminal name {lhs:?}") });
                }
                raw_lines.push((line_no, lhs.to_string(), rhs.to_string()));
            }
        }
        let declared: std::collections::HashSet<&str> = raw_lines.iter().map(|(_, n, _)| n.as_str()).collect();
        for (line_no, lhs, rhs) in &raw_lines {
            let mut alts = Vec::new();
            for alt in split_alternatives(rhs, *line_no)? {
                let mut items = Vec::new();
                for token in tokenize(&alt, *line_no)? {
                    items.push(match token {
                        Token::Quoted(s) => RawItem::Terminal(parse_terminals(&s, *line_no)?),
                        Token::Word(w) if w == "ε" || w == "eps" => RawItem::Terminal(Vec::new()),
                        Token::Word(w) if declared.contains(w.as_str()) => RawItem::Name(w),
                        Token::Word(w) if w.chars().all(|c| Symbol::from_char(c).is_some()) => {
                            RawItem::Terminal(parse_terminals(&w, *line_no)?)
                        }
                        Token::Word(w) => {
                            return Err(GrammarError::Syntax {
                                line: *line_no,
                                message: format!("{w:?} is neither a declared nonterminal nor a terminal string"),
                            })
                        }
                    });
                }
                alts.push(items);
            }
            match rules.iter_mut().find(|(n, _)| n == lhs) {
                Some((_, existing)) => existing.extend(alts),
                None => rules.push((lhs.clone(), alts)),
            }
        }
        let angles = angles.ok_or(GrammarError::Syntax { line: 0, message: "missing `angles:` line".into() })?;
        MetaGrammar::new(rules, angles, axiom, g_rule)
    }

    /// Renders the grammar in its file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let angles: Vec<String> = self.angles.iter().map(|a| format!("{a}")).collect();
        out.push_str(&format!("angles: {}\n", angles.join(" ")));
        out.push_str(&format!("axiom: \"{}\"\n", self.axiom));
        out.push_str(&format!("g_rule: \"{}\"\n", self.g_rule));
        for nt in 0..self.names.len() {
            let alts: Vec<String> = self.productions[nt]
                .iter()
                .map(|p| {
                    if p.items.is_empty() {
                        return "ε".to_string();
                    }
                    p.items
                        .iter()
                        .map(|i| match i {
                            Item::Terminal(t) => {
                                let s: String = t.iter().map(|s| s.as_char()).collect();
                                if s.contains(' ') || self.names.iter().any(|n| *n == s) {
                                    format!("\"{s}\"")
                                } else {
                                    s
                                }
                            }
                            Item::Nonterminal(n) => self.names[*n as usize].clone(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            out.push_str(&format!("{} -> {}\n", self.names[nt], alts.join(" | ")));
        }
        out
    }

    /// Default grammar: mirror-symmetric sprouts. Each rule reads
    /// `X c reverse(X)` where `X` alternates forward steps and turns and
    /// returns to its starting heading, so the traced rule is symmetric about
    /// its chord's perpendicular bisector and preserves the global shape.
    /// Nonterminal suffixes track the heading level in units of the angle.
    pub fn default_grammar() -> Self {
        MetaGrammar::parse(DEFAULT_GRAMMAR).expect("default grammar is valid")
    }

    pub fn distractor_grammar() -> Self {
        MetaGrammar::parse(DISTRACTOR_GRAMMAR).expect("distractor grammar is valid")
    }
}

/// Source of [`MetaGrammar::distractor_grammar`]: the default grammar with
/// straight runs allowed, so rules may place forward symbols side by side.
pub const DISTRACTOR_GRAMMAR: &str = "\
angles: 30 45 60 90
axiom: F
g_rule: G
Start -> F T0 F | G T0 G
T0 -> - S1 - | + Sm1 + | F T0 F | G T0 G
T1 -> + S0 + | F T1 F | G T1 G
Tm1 -> - S0 - | F Tm1 F | G Tm1 G
S1 -> F T1 F | G T1 G
Sm1 -> F Tm1 F | G Tm1 G
S0 -> F | G | ε | F T0 F | G T0 G
";

/// Source of [`MetaGrammar::default_grammar`].
pub const DEFAULT_GRAMMAR: &str = "\
# Mirror-symmetric growth rules. S<k>/T<k> derive the inner part of a rule
# while the turtle's heading is k angle steps counter-clockwise of the
# baseline (m = minus).
angles: 30 45 60 90
axiom: F
g_rule: G
Start -> F T0 F | G T0 G
T0 -> - S1 - | + Sm1 +
T1 -> + S0 +
Tm1 -> - S0 -
S1 -> F T1 F | G T1 G
Sm1 -> F Tm1 F | G Tm1 G
S0 -> F | G | ε | F T0 F | G T0 G
";

impl fmt::Display for MetaGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Unresolved right-hand-side element used when building grammars in code.
#[derive(Clone, Debug, PartialEq)]
pub enum RawItem {
    Terminal(Vec<Symbol>),
    Name(String),
}

enum Token {
    Word(String),
    Quoted(String),
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_nonterminal_name(name: &str) -> bool {
    let mut chars = name.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    first_ok
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.chars().all(|c| c == 'F' || c == 'G')
        && name != "eps"
}

fn split_alternatives(rhs: &str, line: usize) -> Result<Vec<String>, GrammarError> {
    let mut alts = Vec::new();
    let mut current = String::new();
    let mut in_quote = false;
    for c in rhs.chars() {
        match c {
            '"' => {
                in_quote = !in_quote;
                current.push(c);
            }
            '|' if !in_quote => alts.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    if in_quote {
        return Err(GrammarError::Syntax { line, message: "unterminated quote".into() });
    }
    alts.push(current);
    Ok(alts)
}

fn tokenize(alt: &str, line: usize) -> Result<Vec<Token>, GrammarError> {
    let mut tokens = Vec::new();
    let mut chars = alt.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                    None => return Err(GrammarError::Syntax { line, message: "unterminated quote".into() }),
                }
            }
            tokens.push(Token::Quoted(s));
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '"' {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            tokens.push(Token::Word(s));
        }
    }
    if tokens.is_empty() {
        return Err(GrammarError::Syntax { line, message: "empty alternative (write ε for the empty string)".into() });
    }
    Ok(tokens)
}

fn parse_terminals(s: &str, line: usize) -> Result<Vec<Symbol>, GrammarError> {
    s.chars()
        .map(|c| {
            Symbol::from_char(c).ok_or_else(|| GrammarError::Syntax { line, message: format!("{c:?} is not a terminal") })
        })
        .collect()
}

fn parse_terminal_field(rest: &str, line: usize) -> Result<SymbolString, GrammarError> {
    let t = rest.trim();
    let t = t.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(t);
    Ok(SymbolString::from_symbols(parse_terminals(t, line)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_parses() {
        let g = MetaGrammar::default_grammar();
        assert_eq!(g.name(0), START);
        assert_eq!(g.angles(), &[30.0, 45.0, 60.0, 90.0]);
        assert_eq!(g.productions(0).len(), 2);
        let s0 = (0..g.nonterminal_count() as u16).find(|&n| g.name(n) == "S0").unwrap();
        assert_eq!(g.productions(s0).len(), 5);
        assert!(g.productions(s0).iter().any(|p| p.items.is_empty()));
    }

    #[test]
    fn text_round_trip() {
        let g = MetaGrammar::default_grammar();
        let again = MetaGrammar::parse(&g.to_text()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn quoted_terminals_and_comments() {
        let g = MetaGrammar::parse("angles: 90 # right angles\nStart -> \"F G\" A | eps\nA -> \"+#\" | -\n");
        assert!(g.is_err());
        let g = MetaGrammar::parse("angles: 90 # right angles\nStart -> \"F G\" A | eps\nA -> + | -\n").unwrap();
        assert_eq!(g.productions(0)[0].items[0], Item::Terminal(vec![Symbol::F, Symbol::Space, Symbol::G]));
        assert!(g.productions(0)[1].items.is_empty());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(MetaGrammar::parse("Start -> F\n"), Err(GrammarError::Syntax { .. })));
        assert!(matches!(MetaGrammar::parse("angles: 90\nStart -> X\n"), Err(GrammarError::Syntax { line: 2, .. })));
        assert!(matches!(MetaGrammar::parse("angles: 90\nA -> F\n"), Err(GrammarError::Invalid(_))));
        assert!(matches!(MetaGrammar::parse("angles: 90\nStart -> F Start\n"), Err(GrammarError::Invalid(_))));
        assert!(matches!(MetaGrammar::parse("angles: 90\nStart F\n"), Err(GrammarError::Syntax { line: 2, .. })));
        assert!(matches!(MetaGrammar::parse("angles: 90\nStart -> F |\n"), Err(GrammarError::Syntax { .. })));
    }
}
