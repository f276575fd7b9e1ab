//! Gate alphabets, pulse sequences, Pauli products and the standard
//! decoupling families.
//!
//! Sequences produced by models are stored as *half* sequences; the full
//! sequence used for simulation is the half followed by its reverse
//! ([`GateSequence::symmetrize`]).
//!
//! # Sequence files
//!
//! ```text
//! #alphabet=pauli kind=half
//! XYXZXYXZZXYXZXYX
//! IYXYIYXYIYXYIYXY
//! ```
//!
//! One sequence per line, one symbol per gate. Pauli alphabets use `IXYZ`,
//! custom alphabets use the digits `0`–`9` (`#alphabet=custom10`). A
//! sequence may be followed by its score (`XYXY 1.25e-2`); either every line
//! carries one or none does.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// The set of gates a sequence is drawn from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Alphabet {
    /// `{I, X, Y, Z}` with ids 0..4.
    Pauli,
    /// `n ≤ 10` opaque gates with ids `0..n`.
    Custom(u8),
}

impl Alphabet {
    pub const MAX_CUSTOM: u8 = 10;

    pub fn custom(n: usize) -> Result<Self> {
        if n == 0 || n > Self::MAX_CUSTOM as usize {
            return Err(Error::InvalidArgument(format!(
                "custom alphabet size must be in 1..={}, got {n}",
                Self::MAX_CUSTOM
            )));
        }
        Ok(Alphabet::Custom(n as u8))
    }

    pub fn size(self) -> usize {
        match self {
            Alphabet::Pauli => 4,
            Alphabet::Custom(n) => n as usize,
        }
    }

    pub fn is_pauli(self) -> bool {
        matches!(self, Alphabet::Pauli)
    }

    /// Single-character file symbol.
    pub fn symbol(self, gate: Gate) -> char {
        match self {
            Alphabet::Pauli => ['I', 'X', 'Y', 'Z'][gate.id() as usize],
            Alphabet::Custom(_) => (b'0' + gate.id()) as char,
        }
    }

    /// Display label: `I`/`X`/`Y`/`Z` or `G0`..`G9`.
    pub fn label(self, gate: Gate) -> String {
        match self {
            Alphabet::Pauli => self.symbol(gate).to_string(),
            Alphabet::Custom(_) => format!("G{}", gate.id()),
        }
    }

    pub fn parse_symbol(self, c: char) -> Option<Gate> {
        let id = match (self, c) {
            (Alphabet::Pauli, 'I') => 0,
            (Alphabet::Pauli, 'X') => 1,
            (Alphabet::Pauli, 'Y') => 2,
            (Alphabet::Pauli, 'Z') => 3,
            (Alphabet::Custom(n), d @ '0'..='9') if (d as u8 - b'0') < n => d as u8 - b'0',
            _ => return None,
        };
        Some(Gate(id))
    }

    pub fn gates(self) -> impl Iterator<Item = Gate> {
        (0..self.size() as u8).map(Gate)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::Pauli => f.write_str("pauli"),
            Alphabet::Custom(n) => write!(f, "custom{n}"),
        }
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.to_string()
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "pauli" {
            return Ok(Alphabet::Pauli);
        }
        s.strip_prefix("custom")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown alphabet `{s}`")))
            .and_then(Alphabet::custom)
    }
}

/// A gate id within some [`Alphabet`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gate(u8);

impl Gate {
    pub const I: Gate = Gate(0);
    pub const X: Gate = Gate(1);
    pub const Y: Gate = Gate(2);
    pub const Z: Gate = Gate(3);

    pub fn new(id: u8, alphabet: Alphabet) -> Result<Self> {
        if (id as usize) < alphabet.size() {
            Ok(Gate(id))
        } else {
            Err(Error::InvalidArgument(format!("gate id {id} outside alphabet {alphabet}")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Whether a sequence is a half to be mirrored, or an already mirrored full
/// sequence.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Half,
    Full,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Half => "half",
            Kind::Full => "full",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Kind::Half),
            "full" => Ok(Kind::Full),
            _ => Err(Error::InvalidArgument(format!("unknown sequence kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GateSequence {
    gates: Vec<Gate>,
    kind: Kind,
    alphabet: Alphabet,
}

impl GateSequence {
    pub fn new(gates: Vec<Gate>, kind: Kind, alphabet: Alphabet) -> Result<Self> {
        if gates.is_empty() {
            return Err(Error::Empty("gate sequence".into()));
        }
        if let Some(g) = gates.iter().find(|g| g.index() >= alphabet.size()) {
            return Err(Error::InvalidArgument(format!(
                "gate id {} outside alphabet {alphabet}",
                g.id()
            )));
        }
        if kind == Kind::Full {
            let n = gates.len();
            if n % 2 != 0 || (0..n / 2).any(|k| gates[k] != gates[n - 1 - k]) {
                return Err(Error::Kind("full sequence must be an even-length palindrome".into()));
            }
        }
        Ok(GateSequence { gates, kind, alphabet })
    }

    pub fn half(gates: Vec<Gate>, alphabet: Alphabet) -> Result<Self> {
        Self::new(gates, Kind::Half, alphabet)
    }

    /// Half sequence from raw ids; panics on ids outside the alphabet.
    pub fn from_ids(ids: &[u8], alphabet: Alphabet) -> Self {
        Self::half(ids.iter().map(|&i| Gate(i)).collect(), alphabet)
            .expect("gate ids must lie inside the alphabet")
    }

    /// Parses contiguous symbols such as `"XYXY"`.
    pub fn parse(symbols: &str, kind: Kind, alphabet: Alphabet) -> Result<Self> {
        let gates = symbols
            .chars()
            .map(|c| {
                alphabet
                    .parse_symbol(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("symbol `{c}` not in {alphabet}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(gates, kind, alphabet)
    }

    /// Parses a Pauli half sequence; panics on bad input. Intended for literals.
    pub fn pauli(symbols: &str) -> Self {
        Self::parse(symbols, Kind::Half, Alphabet::Pauli).expect("valid Pauli literal")
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.gates.iter().map(|g| g.id())
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn symbols(&self) -> String {
        self.gates.iter().map(|&g| self.alphabet.symbol(g)).collect()
    }

    /// Appends the reverse of a half sequence, giving a full palindrome.
    pub fn symmetrize(&self) -> Result<GateSequence> {
        if self.kind != Kind::Half {
            return Err(Error::Kind("symmetrize expects a half sequence".into()));
        }
        let mut gates = self.gates.clone();
        gates.extend(self.gates.iter().rev());
        Ok(GateSequence { gates, kind: Kind::Full, alphabet: self.alphabet })
    }

    /// First half of a full sequence.
    pub fn first_half(&self) -> Result<GateSequence> {
        if self.kind != Kind::Full {
            return Err(Error::Kind("first_half expects a full sequence".into()));
        }
        let gates = self.gates[..self.gates.len() / 2].to_vec();
        Ok(GateSequence { gates, kind: Kind::Half, alphabet: self.alphabet })
    }

    /// Repeats a sequence `times` times (kind stays half).
    pub fn repeat(&self, times: usize) -> Result<GateSequence> {
        if self.kind != Kind::Half {
            return Err(Error::Kind("repeat expects a half sequence".into()));
        }
        let gates = self.gates.repeat(times);
        GateSequence::half(gates, self.alphabet)
    }
}

impl fmt::Display for GateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbols())
    }
}

/// A Pauli operator with an exact phase `i^phase`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    base: Gate,
    phase: u8,
}

impl PauliWord {
    pub fn new(base: Gate, phase: u8) -> Self {
        assert!(base.index() < 4, "Pauli base out of range");
        PauliWord { base, phase: phase % 4 }
    }

    pub fn from_gate(base: Gate) -> Self {
        Self::new(base, 0)
    }

    pub fn base(self) -> Gate {
        self.base
    }

    /// Exponent `k` of the phase `i^k`.
    pub fn phase(self) -> u8 {
        self.phase
    }

    /// Group product `self · rhs` with exact phase.
    pub fn multiply(self, rhs: PauliWord) -> PauliWord {
        let (a, b) = (self.base.id(), rhs.base.id());
        let (base, extra) = match (a, b) {
            (0, _) => (b, 0),
            (_, 0) => (a, 0),
            _ if a == b => (0, 0),
            _ => {
                let c = 6 - a - b;
                // XY = iZ, YZ = iX, ZX = iY; reversed order picks up -i.
                let cyclic = matches!((a, b), (1, 2) | (2, 3) | (3, 1));
                (c, if cyclic { 1 } else { 3 })
            }
        };
        PauliWord::new(Gate(base), self.phase + rhs.phase + extra)
    }
}

impl std::ops::Mul for PauliWord {
    type Output = PauliWord;

    fn mul(self, rhs: PauliWord) -> PauliWord {
        self.multiply(rhs)
    }
}

/// Concatenation `A[B]`: every pulse `P` of `A` is replaced by `(P·Q₁)Q₂…Qₙ`.
/// Phases of the block products are dropped.
pub fn concatenate(a: &GateSequence, b: &GateSequence) -> Result<GateSequence> {
    if !a.alphabet.is_pauli() || !b.alphabet.is_pauli() {
        return Err(Error::Unsupported("concatenation requires Pauli sequences".into()));
    }
    let first = PauliWord::from_gate(b.gates[0]);
    let mut gates = Vec::with_capacity(a.len() * b.len());
    for &p in &a.gates {
        gates.push((PauliWord::from_gate(p) * first).base());
        gates.extend_from_slice(&b.gates[1..]);
    }
    GateSequence::half(gates, Alphabet::Pauli)
}

/// Standard decoupling families.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Dd4,
    Dd8,
    Edd8,
    Cdd16,
    Cdd32,
    Cdd64,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Dd4, Family::Dd8, Family::Edd8, Family::Cdd16, Family::Cdd32, Family::Cdd64];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dd4 => "DD4",
            Family::Dd8 => "DD8",
            Family::Edd8 => "EDD8",
            Family::Cdd16 => "CDD16",
            Family::Cdd32 => "CDD32",
            Family::Cdd64 => "CDD64",
        }
    }

    pub fn length(self) -> usize {
        match self {
            Family::Dd4 => 4,
            Family::Dd8 | Family::Edd8 => 8,
            Family::Cdd16 => 16,
            Family::Cdd32 => 32,
            Family::Cdd64 => 64,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// The six ordered pairs `(P1, P2)` of distinct non-identity Paulis, in
/// lexicographic order `XY, XZ, YX, YZ, ZX, ZY`.
pub fn pauli_pairs() -> Vec<(Gate, Gate)> {
    let nontrivial = [Gate::X, Gate::Y, Gate::Z];
    let mut out = Vec::with_capacity(6);
    for &p1 in &nontrivial {
        for &p2 in &nontrivial {
            if p1 != p2 {
                out.push((p1, p2));
            }
        }
    }
    out
}

fn seq(gates: &[Gate]) -> GateSequence {
    GateSequence::half(gates.to_vec(), Alphabet::Pauli).expect("family gates are Pauli")
}

fn family_members_for(family: Family, p1: Gate, p2: Gate) -> Result<Vec<GateSequence>> {
    let dd4 = || seq(&[p1, p2, p1, p2]);
    let dd8 = || seq(&[Gate::I, p2, p1, p2, Gate::I, p2, p1, p2]);
    Ok(match family {
        Family::Dd4 => vec![dd4()],
        Family::Dd8 => vec![dd8()],
        Family::Edd8 => vec![seq(&[p1, p2, p1, p2, p2, p1, p2, p1])],
        Family::Cdd16 => vec![concatenate(&dd4(), &dd4())?],
        Family::Cdd32 => vec![concatenate(&dd4(), &dd8())?, concatenate(&dd8(), &dd4())?],
        Family::Cdd64 => {
            let cdd16 = concatenate(&dd4(), &dd4())?;
            vec![concatenate(&dd4(), &cdd16)?, concatenate(&dd8(), &dd8())?]
        }
    })
}

/// Members of a family. With `assignment = None`, every `(P1, P2)` pair from
/// [`pauli_pairs`] is used in order; concatenated families use the same pair
/// for the outer and inner sequence.
pub fn make_family(family: Family, assignment: Option<(Gate, Gate)>) -> Result<Vec<GateSequence>> {
    let pairs = match assignment {
        Some((p1, p2)) => {
            let valid = |g: Gate| matches!(g, Gate::X | Gate::Y | Gate::Z);
            if !valid(p1) || !valid(p2) || p1 == p2 {
                return Err(Error::InvalidArgument(
                    "family assignment needs two distinct gates from {X, Y, Z}".into(),
                ));
            }
            vec![(p1, p2)]
        }
        None => pauli_pairs(),
    };
    let mut out = Vec::new();
    for (p1, p2) in pairs {
        out.extend(family_members_for(family, p1, p2)?);
    }
    Ok(out)
}

/// Half sequence of i.i.d. uniform gates.
pub fn random_sequence<R: Rng + ?Sized>(
    half_length: usize,
    alphabet: Alphabet,
    rng: &mut R,
) -> Result<GateSequence> {
    if half_length == 0 {
        return Err(Error::InvalidArgument("half length must be at least 1".into()));
    }
    let n = alphabet.size() as u8;
    let gates = (0..half_length).map(|_| Gate(rng.random_range(0..n))).collect();
    GateSequence::half(gates, alphabet)
}

/// Writes a sequence file. All sequences must share alphabet and kind.
pub fn write_sequences<W: Write>(
    mut out: W,
    alphabet: Alphabet,
    kind: Kind,
    sequences: &[GateSequence],
) -> Result<()> {
    writeln!(out, "#alphabet={alphabet} kind={kind}")?;
    for s in sequences {
        if s.alphabet != alphabet || s.kind != kind {
            return Err(Error::Kind(format!(
                "sequence {s} is {} {}, file is {alphabet} {kind}",
                s.alphabet, s.kind
            )));
        }
        writeln!(out, "{s}")?;
    }
    Ok(())
}

/// Writes a sequence file with a score after each sequence.
pub fn write_scored_sequences<W: Write>(
    mut out: W,
    alphabet: Alphabet,
    kind: Kind,
    entries: &[(GateSequence, f64)],
) -> Result<()> {
    writeln!(out, "#alphabet={alphabet} kind={kind}")?;
    for (s, score) in entries {
        if s.alphabet != alphabet || s.kind != kind {
            return Err(Error::Kind(format!(
                "sequence {s} is {} {}, file is {alphabet} {kind}",
                s.alphabet, s.kind
            )));
        }
        writeln!(out, "{s} {score:e}")?;
    }
    Ok(())
}

/// Contents of a parsed sequence file.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFile {
    pub alphabet: Alphabet,
    pub kind: Kind,
    pub sequences: Vec<GateSequence>,
    /// One score per sequence when the file carries a score column, else empty.
    pub scores: Vec<f64>,
}

pub fn read_sequences<R: BufRead>(input: R) -> Result<SequenceFile> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let header = header?;
    let (alphabet, kind) = parse_header(&header).map_err(|msg| Error::parse(1, msg))?;
    let mut sequences = Vec::new();
    let mut scores = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(symbols) = fields.next() else { continue };
        let s = GateSequence::parse(symbols, kind, alphabet).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        match (fields.next(), fields.next()) {
            (None, _) if scores.is_empty() => {}
            (Some(v), None) if scores.len() == sequences.len() => {
                let score: f64 = v.parse().map_err(|_| Error::parse(idx + 1, format!("bad score `{v}`")))?;
                scores.push(score);
            }
            _ => return Err(Error::parse(idx + 1, "every line needs a sequence and at most one score, consistently")),
        }
        sequences.push(s);
    }
    Ok(SequenceFile { alphabet, kind, sequences, scores })
}

fn parse_header(line: &str) -> std::result::Result<(Alphabet, Kind), String> {
    let body = line.strip_prefix('#').ok_or("header must start with `#`")?;
    let mut alphabet = None;
    let mut kind = None;
    for field in body.split_whitespace() {
        match field.split_once('=') {
            Some(("alphabet", v)) => alphabet = Some(v.parse::<Alphabet>().map_err(|e| e.to_string())?),
            Some(("kind", v)) => kind = Some(v.parse::<Kind>().map_err(|e| e.to_string())?),
            _ => return Err(format!("unexpected header field `{field}`")),
        }
    }
    Ok((alphabet.ok_or("header lacks alphabet")?, kind.ok_or("header lacks kind")?))
}
