//! Subsequence statistics, baseline comparisons against the standard
//! families, replay of known good sequences and SVG convergence charts.

use std::fmt::Write as _;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::models::Scorer;
use crate::optimizer::GenerationLog;
use crate::rng::Rng;
use crate::sequences::{make_family, random_sequence, Alphabet, Family, Gate, GateSequence};

/// Percentages of length-2 or length-3 windows, arranged as
/// (context → next gate). With a prefix only windows starting with that gate
/// are counted and the prefix is left out of the row label.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsequenceTable {
    pub length: usize,
    pub prefix: Option<Gate>,
    pub alphabet: Alphabet,
    /// Row contexts as gate ids, in lexicographic order.
    pub rows: Vec<Vec<u8>>,
    /// `counts[row][next]`.
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

pub fn subsequence_frequencies(data: &[GateSequence], length: usize, prefix: Option<Gate>) -> Result<SubsequenceTable> {
    if !(2..=3).contains(&length) {
        return Err(Error::InvalidArgument(format!("subsequence length must be 2 or 3, got {length}")));
    }
    let alphabet = data.first().ok_or_else(|| Error::Empty("no sequences to count".into()))?.alphabet();
    if let Some(p) = prefix {
        Gate::new(p.id(), alphabet)?;
    }
    let n = alphabet.size();
    let ctx_len = length - 1 - usize::from(prefix.is_some());
    let rows: Vec<Vec<u8>> = (0..n.pow(ctx_len as u32))
        .map(|mut r| {
            let mut ctx = vec![0u8; ctx_len];
            for slot in ctx.iter_mut().rev() {
                *slot = (r % n) as u8;
                r /= n;
            }
            ctx
        })
        .collect();
    let mut counts = vec![vec![0u64; n]; rows.len()];
    let mut total = 0;
    for seq in data {
        if seq.alphabet() != alphabet {
            return Err(Error::Shape("mixed alphabets".into()));
        }
        let ids: Vec<u8> = seq.ids().collect();
        for w in ids.windows(length) {
            let ctx = match prefix {
                Some(p) if w[0] != p.id() => continue,
                Some(_) => &w[1..length - 1],
                None => &w[..length - 1],
            };
            let row = ctx.iter().fold(0usize, |acc, &g| acc * n + g as usize);
            counts[row][w[length - 1] as usize] += 1;
            total += 1;
        }
    }
    Ok(SubsequenceTable { length, prefix, alphabet, rows, counts, total })
}

impl SubsequenceTable {
    /// Cell percentages; all cells sum to 100 unless nothing was counted.
    pub fn percentages(&self) -> Vec<Vec<f64>> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|r| r.iter().map(|&c| 100.0 * c as f64 / t).collect()).collect()
    }

    fn row_label(&self, row: &[u8]) -> String {
        if row.is_empty() {
            return self.prefix.map_or("-".into(), |p| self.alphabet.label(p));
        }
        row.iter().map(|&g| self.alphabet.label(Gate::new(g, self.alphabet).expect("row ids come from the alphabet"))).collect()
    }

    fn column_labels(&self) -> Vec<String> {
        self.alphabet.gates().map(|g| self.alphabet.label(g)).collect()
    }

    /// `context,next,count,percent` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("context,next,count,percent\n");
        let pct = self.percentages();
        let cols = self.column_labels();
        for (r, row) in self.rows.iter().enumerate() {
            for (c, col) in cols.iter().enumerate() {
                writeln!(out, "{},{col},{},{:.4}", self.row_label(row), self.counts[r][c], pct[r][c]).unwrap();
            }
        }
        out
    }

    /// Aligned table of percentages. With `other`, each cell also shows the
    /// other table's value in parentheses.
    pub fn to_text(&self, other: Option<&SubsequenceTable>) -> Result<String> {
        if let Some(o) = other {
            if o.rows != self.rows || o.alphabet != self.alphabet {
                return Err(Error::Shape("tables have different layouts".into()));
            }
        }
        let pct = self.percentages();
        let other_pct = other.map(SubsequenceTable::percentages);
        let corner = match (self.length, self.prefix) {
            (2, _) => "prev\\next".to_string(),
            (_, Some(p)) => format!("{}·\\last", self.alphabet.label(p)),
            _ => "ctx\\next".to_string(),
        };
        let mut grid: Vec<Vec<String>> = vec![std::iter::once(corner).chain(self.column_labels()).collect()];
        for (r, row) in self.rows.iter().enumerate() {
            let mut line = vec![self.row_label(row)];
            for c in 0..self.alphabet.size() {
                let mut cell = format_percent(pct[r][c]);
                if let Some(o) = &other_pct {
                    write!(cell, " ({})", format_percent(o[r][c])).unwrap();
                }
                line.push(cell);
            }
            grid.push(line);
        }
        Ok(align(&grid))
    }
}

/// Two decimals; anything below 0.005% prints as `0.00%`.
pub fn format_percent(p: f64) -> String {
    if p < 0.005 {
        "0.00%".into()
    } else {
        format!("{p:.2}%")
    }
}

fn align(grid: &[Vec<String>]) -> String {
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in grid {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(s, &w)| format!("{s:>w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRow {
    pub label: String,
    pub avg: f64,
    pub min: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
}

impl BaselineReport {
    pub fn row(&self, label: &str) -> Option<&BaselineRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sequences,avg,min,count\n");
        for r in &self.rows {
            writeln!(out, "{},{:.6},{:.6},{}", r.label, r.avg, r.min, r.count).unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut grid = vec![vec!["sequences".to_string(), "avg".into(), "min".into(), "count".into()]];
        for r in &self.rows {
            grid.push(vec![r.label.clone(), format!("{:.6}", r.avg), format!("{:.6}", r.min), r.count.to_string()]);
        }
        align(&grid)
    }
}

/// Repeats `member` to `half_length` gates. The member length must divide it.
pub fn fill_half(member: &GateSequence, half_length: usize) -> Result<GateSequence> {
    let len = member.len();
    if len > half_length {
        return Err(Error::InvalidArgument(format!("sequence of length {len} does not fit a half of {half_length}")));
    }
    if half_length % len != 0 {
        return Err(Error::InvalidArgument(format!("length {len} does not divide the half length {half_length}")));
    }
    member.repeat(half_length / len)
}

fn summarize(label: impl Into<String>, scores: &[f64]) -> Result<BaselineRow> {
    if scores.is_empty() {
        return Err(Error::Empty("baseline row".into()));
    }
    Ok(BaselineRow {
        label: label.into(),
        avg: scores.iter().sum::<f64>() / scores.len() as f64,
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        count: scores.len(),
    })
}

/// Families that fit a full sequence of `full_length` gates.
pub fn default_families(full_length: usize) -> Vec<Family> {
    Family::ALL.into_iter().filter(|f| f.length() <= full_length / 2 && (full_length / 2) % f.length() == 0).collect()
}

/// Average and best score of every member of each family, repeated to half
/// of `full_length` and mirrored, plus a row for `random_samples` uniform
/// random sequences drawn from `seed`.
pub fn baseline_report<S: Scorer + ?Sized>(
    scorer: &S,
    full_length: usize,
    families: &[Family],
    random_samples: usize,
    seed: u64,
) -> Result<BaselineReport> {
    if full_length == 0 || full_length % 2 != 0 {
        return Err(Error::InvalidArgument(format!("full length must be even and positive, got {full_length}")));
    }
    let half = full_length / 2;
    let mut rows = Vec::new();
    for &family in families {
        let members = make_family(family, None)?
            .iter()
            .map(|m| fill_half(m, half))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidArgument(format!("{family}: {e}")))?;
        rows.push(summarize(family.name(), &scorer.score_halves(&members)?)?);
    }
    if random_samples > 0 {
        let mut rng = Rng::seed_from_u64(seed);
        let halves = (0..random_samples).map(|_| random_sequence(half, Alphabet::Pauli, &mut rng)).collect::<Result<Vec<_>>>()?;
        rows.push(summarize("Random", &scorer.score_halves(&halves)?)?);
    }
    Ok(BaselineReport { rows })
}

/// Best half sequences reported for the three Pauli experiments.
pub const BEST_SEQUENCES: [(&str, &str); 3] = [
    ("E1", "XYXZXYXZZXYXZXYX"),
    ("E2", "ZZXZZZXZZXZXXXZXXXZXXZXXXZXZZXZZ"),
    ("E3", "ZXZZYXYZYXYXYYXYYYYXYYYXYYXYXYXYYZXZYZXZYXYXXYXYXYXYYXYYYXYXXYXX"),
];

pub fn best_sequence(which: &str) -> Result<GateSequence> {
    BEST_SEQUENCES
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(which))
        .map(|(_, s)| GateSequence::pauli(s))
        .ok_or_else(|| Error::InvalidArgument(format!("no stored sequence `{which}` (expected E1, E2 or E3)")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRow {
    pub label: String,
    pub half: GateSequence,
    pub score: f64,
}

/// Scores the stored best sequences on the given instance.
pub fn replay_best_sequences<S: Scorer + ?Sized>(scorer: &S, which: &[&str]) -> Result<Vec<ReplayRow>> {
    let halves = which.iter().map(|w| best_sequence(w)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (w, half) in which.iter().zip(halves) {
        let score = scorer.score_halves(std::slice::from_ref(&half))?[0];
        rows.push(ReplayRow { label: w.to_ascii_uppercase(), half, score });
    }
    Ok(rows)
}

/// One line series of a convergence chart.
pub struct Series<'a> {
    pub label: &'a str,
    pub logs: &'a [GenerationLog],
}

/// Line chart of average (solid) and minimum (dashed) training-set score per
/// generation, log-scaled, with optional horizontal reference lines.
pub fn convergence_svg(series: &[Series<'_>], references: &[(&str, f64)]) -> Result<String> {
    let points: Vec<f64> = series
        .iter()
        .flat_map(|s| s.logs.iter().flat_map(|l| [l.avg_score, l.min_score]))
        .chain(references.iter().map(|r| r.1))
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    if points.is_empty() {
        return Err(Error::Empty("no positive scores to plot".into()));
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil().max(lo + 1.0);
    let max_gen = series.iter().flat_map(|s| s.logs.iter().map(|l| l.generation)).max().unwrap_or(0).max(1) as f64;
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 70.0, 170.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |g: f64| left + pw * g / max_gen;
    let y = |v: f64| top + ph * (hi - v.max(10f64.powf(lo)).log10()) / (hi - lo);
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for e in (lo as i32)..=(hi as i32) {
        let yy = y(10f64.powi(e));
        writeln!(s, r##"<line x1="{left}" x2="{}" y1="{yy:.1}" y2="{yy:.1}" stroke="#ddd"/>"##, left + pw).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#, left - 6.0, yy + 4.0).unwrap();
    }
    let step = ((max_gen / 10.0).ceil() as usize).max(1);
    for g in (0..=max_gen as usize).step_by(step) {
        let xx = x(g as f64);
        writeln!(s, r#"<text x="{xx:.1}" y="{}" text-anchor="middle">{g}</text>"#, top + ph + 18.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">generation</text>"#, left + pw / 2.0, h - 10.0).unwrap();
    writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">score</text>"#, top + ph / 2.0, top + ph / 2.0).unwrap();

    let mut legend_y = top + 10.0;
    let mut legend = |s: &mut String, label: &str, color: &str, dash: &str| {
        let lx = left + pw + 12.0;
        writeln!(s, r#"<line x1="{lx}" x2="{}" y1="{legend_y}" y2="{legend_y}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#, lx + 24.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, legend_y + 4.0, escape(label)).unwrap();
        legend_y += 18.0;
    };
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (dash, pick, suffix) in [("", 0, "avg"), ("6 4", 1, "min")] {
            let pts: Vec<String> = ser
                .logs
                .iter()
                .map(|l| {
                    let v = if pick == 0 { l.avg_score } else { l.min_score };
                    format!("{:.1},{:.1}", x(l.generation as f64), y(v))
                })
                .collect();
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}" points="{}"/>"#, pts.join(" ")).unwrap();
            legend(&mut s, &format!("{} {suffix}", ser.label), color, dash);
        }
    }
    for (label, v) in references {
        let yy = y(*v);
        writeln!(s, r#"<line x1="{left}" x2="{}" y1="{yy:.1}" y2="{yy:.1}" stroke="gray" stroke-dasharray="2 3"/>"#, left + pw).unwrap();
        legend(&mut s, label, "gray", "2 3");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
