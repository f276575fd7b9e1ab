//! Versioned text checkpoints. Floats are written in shortest round-trip
//! form, so loading reproduces every weight and moment bit for bit.
//!
//! ```text
//! #ddseq-checkpoint v1
//! model network
//! alphabet pauli
//! seed 17
//! ...
//! layer 32 peephole 1 projection 16
//! array layer0.w_in 128 4
//! <one row per line>
//! end
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::adam::{AdamConfig, AdamState};
use super::network::{LayerSpec, Network, Shape};
use super::ngram::NGramModel;
use super::training::{Hyperparameters, NetworkModel};
use super::SequenceModel;
use crate::error::{Error, Result};
use crate::sequences::Alphabet;

const HEADER: &str = "#ddseq-checkpoint v1";
const PEEPHOLE_CONVENTION: &str = "input:c_prev forget:c_prev output:c_cur";

pub fn write_model<W: Write>(model: &SequenceModel, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    match model {
        SequenceModel::Network(m) => write_network(m, &mut out)?,
        SequenceModel::NGram(m) => write_ngram(m, &mut out)?,
    }
    writeln!(out, "end")?;
    Ok(())
}

fn write_network<W: Write>(m: &NetworkModel, out: &mut W) -> Result<()> {
    let a = &m.hyper.adam;
    writeln!(out, "model network")?;
    writeln!(out, "alphabet {}", m.alphabet)?;
    writeln!(out, "seed {}", m.seed)?;
    writeln!(out, "epoch {}", m.epoch)?;
    writeln!(out, "best_avg_score {:e}", m.best_avg_score)?;
    writeln!(out, "peephole_convention {PEEPHOLE_CONVENTION}")?;
    writeln!(out, "step_rate {:e}", a.step_rate)?;
    writeln!(out, "beta1 {:e}", a.beta1)?;
    writeln!(out, "beta2 {:e}", a.beta2)?;
    writeln!(out, "epsilon {:e}", a.epsilon)?;
    writeln!(out, "batch_size {}", m.hyper.batch_size)?;
    writeln!(out, "adam_t {}", m.adam.t)?;
    let specs = m.net.specs();
    writeln!(out, "layers {}", specs.len())?;
    for s in &specs {
        let proj = s.projection.map_or("none".to_string(), |k| k.to_string());
        writeln!(out, "layer {} peephole {} projection {proj}", s.units, u8::from(s.peephole))?;
    }
    let params = m.net.params();
    for (name, shape, values) in &params {
        write_array(out, name, *shape, values)?;
    }
    for (moment, bufs) in [("m", &m.adam.m), ("v", &m.adam.v)] {
        for ((name, shape, _), values) in params.iter().zip(bufs.iter()) {
            write_array(out, &format!("adam.{moment}.{name}"), *shape, values)?;
        }
    }
    Ok(())
}

fn write_array<W: Write>(out: &mut W, name: &str, Shape(rows, cols): Shape, values: &[f64]) -> Result<()> {
    writeln!(out, "array {name} {rows} {cols}")?;
    for row in values.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn write_ngram<W: Write>(m: &NGramModel, out: &mut W) -> Result<()> {
    writeln!(out, "model ngram")?;
    writeln!(out, "alphabet {}", m.alphabet())?;
    writeln!(out, "order {}", m.order())?;
    let rows: Vec<_> = m.contexts().collect();
    writeln!(out, "contexts {}", rows.len())?;
    for (ctx, counts) in rows {
        let key = if ctx.is_empty() {
            "-".to_string()
        } else {
            crate::sequences::GateSequence::from_ids(ctx, m.alphabet()).symbols()
        };
        let counts: Vec<String> = counts.iter().map(u64::to_string).collect();
        writeln!(out, "{key} {}", counts.join(" "))?;
    }
    Ok(())
}

pub fn save_model(model: &SequenceModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SequenceModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_model(BufReader::new(file))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::parse(self.line, "unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, msg)
    }

    /// Reads `key value` and returns the value.
    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.next_line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.err(format!("expected `{key} <value>`, found `{l}`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.field(key)?;
        v.parse().map_err(|e| self.err(format!("bad {key} `{v}`: {e}")))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<SequenceModel> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    let header = lines.next_line()?;
    if header.trim_end() != HEADER {
        return Err(lines.err(format!("expected `{HEADER}`, found `{header}`")));
    }
    let kind = lines.field("model")?;
    let model = match kind.as_str() {
        "network" => SequenceModel::Network(Box::new(read_network(&mut lines)?)),
        "ngram" => SequenceModel::NGram(read_ngram(&mut lines)?),
        other => return Err(lines.err(format!("unknown model kind `{other}`"))),
    };
    let end = lines.next_line()?;
    if end.trim() != "end" {
        return Err(lines.err(format!("expected `end`, found `{end}`")));
    }
    Ok(model)
}

fn read_network<R: BufRead>(lines: &mut Lines<R>) -> Result<NetworkModel> {
    let alphabet: Alphabet = lines.parsed("alphabet")?;
    let seed: u64 = lines.parsed("seed")?;
    let epoch: u64 = lines.parsed("epoch")?;
    let best_avg_score: f64 = lines.parsed("best_avg_score")?;
    let convention = lines.field("peephole_convention")?;
    if convention != PEEPHOLE_CONVENTION {
        return Err(lines.err(format!("unsupported peephole convention `{convention}`")));
    }
    let adam = AdamConfig {
        step_rate: lines.parsed("step_rate")?,
        beta1: lines.parsed("beta1")?,
        beta2: lines.parsed("beta2")?,
        epsilon: lines.parsed("epsilon")?,
    };
    let batch_size: usize = lines.parsed("batch_size")?;
    let t: u64 = lines.parsed("adam_t")?;
    let n_layers: usize = lines.parsed("layers")?;
    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let l = lines.next_line()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        let spec = match parts.as_slice() {
            ["layer", units, "peephole", p, "projection", k] => {
                let units = units.parse().map_err(|_| lines.err("bad unit count"))?;
                let peephole = match *p {
                    "0" => false,
                    "1" => true,
                    _ => return Err(lines.err("peephole flag must be 0 or 1")),
                };
                let projection = match *k {
                    "none" => None,
                    k => Some(k.parse().map_err(|_| lines.err("bad projection dimension"))?),
                };
                LayerSpec { units, peephole, projection }
            }
            _ => return Err(lines.err(format!("malformed layer line `{l}`"))),
        };
        specs.push(spec);
    }
    let mut net = Network::zeros(alphabet.size(), &specs)?;
    let layout: Vec<(String, Shape)> = net.params().into_iter().map(|(n, s, _)| (n, s)).collect();
    for ((name, shape), dst) in layout.iter().zip(net.params_mut()) {
        read_array(lines, name, *shape, dst)?;
    }
    let mut state = AdamState::new(&layout.iter().map(|(_, Shape(r, c))| r * c).collect::<Vec<_>>());
    state.t = t;
    for (moment, bufs) in [("m", &mut state.m), ("v", &mut state.v)] {
        for ((name, shape), dst) in layout.iter().zip(bufs.iter_mut()) {
            read_array(lines, &format!("adam.{moment}.{name}"), *shape, dst)?;
        }
    }
    Ok(NetworkModel {
        alphabet,
        net,
        hyper: Hyperparameters { adam, batch_size },
        adam: state,
        seed,
        epoch,
        best_avg_score,
    })
}

fn read_array<R: BufRead>(lines: &mut Lines<R>, name: &str, Shape(rows, cols): Shape, dst: &mut [f64]) -> Result<()> {
    let head = lines.next_line()?;
    let expect = format!("array {name} {rows} {cols}");
    if head.trim_end() != expect {
        return Err(lines.err(format!("expected `{expect}`, found `{head}`")));
    }
    for r in 0..rows {
        let l = lines.next_line()?;
        let values: Vec<&str> = l.split_whitespace().collect();
        if values.len() != cols {
            return Err(lines.err(format!("{name}: expected {cols} values, found {}", values.len())));
        }
        for (c, v) in values.iter().enumerate() {
            dst[r * cols + c] = v.parse().map_err(|_| lines.err(format!("{name}: bad number `{v}`")))?;
        }
    }
    Ok(())
}

fn read_ngram<R: BufRead>(lines: &mut Lines<R>) -> Result<NGramModel> {
    let alphabet: Alphabet = lines.parsed("alphabet")?;
    let order: usize = lines.parsed("order")?;
    let n: usize = lines.parsed("contexts")?;
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        let l = lines.next_line()?;
        let mut parts = l.split_whitespace();
        let key = parts.next().ok_or_else(|| lines.err("empty context line"))?;
        let ctx: Vec<u8> = if key == "-" {
            Vec::new()
        } else {
            key.chars()
                .map(|c| alphabet.parse_symbol(c).map(|g| g.id()))
                .collect::<Option<_>>()
                .ok_or_else(|| lines.err(format!("bad context `{key}`")))?
        };
        let row: Vec<u64> = parts
            .map(|v| v.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.err("bad count"))?;
        counts.insert(ctx, row);
    }
    NGramModel::from_counts(order, alphabet, counts).map_err(|e| lines.err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::GateSequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trained_model() -> NetworkModel {
        let specs = [
            LayerSpec { units: 5, peephole: true, projection: Some(3) },
            LayerSpec { units: 3, peephole: false, projection: None },
        ];
        let hyper = Hyperparameters { adam: AdamConfig { step_rate: 0.1, beta1: 0.7, beta2: 0.99, epsilon: 1e-5 }, batch_size: 2 };
        let mut m = NetworkModel::new(Alphabet::Pauli, &specs, hyper, 42).unwrap();
        let data = vec![GateSequence::pauli("XYXZ"), GateSequence::pauli("ZZYX"), GateSequence::pauli("IXYZ")];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            m.train_epoch(&data, 32, &mut rng).unwrap();
        }
        m.best_avg_score = 0.123456789012345;
        m
    }

    #[test]
    fn network_round_trip_is_bit_exact() {
        let m = SequenceModel::Network(Box::new(trained_model()));
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn untrained_model_keeps_infinite_best_score() {
        let mut m = trained_model();
        m.best_avg_score = f64::INFINITY;
        let m = SequenceModel::Network(Box::new(m));
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn ngram_round_trip() {
        let data = vec![GateSequence::pauli("XYZXYI"), GateSequence::pauli("ZZYX")];
        let m = SequenceModel::NGram(NGramModel::fit(&data, 3).unwrap());
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let m = SequenceModel::Network(Box::new(trained_model()));
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(read_model(truncated.as_bytes()).is_err());
        let bad_header = text.replacen("v1", "v9", 1);
        assert!(matches!(read_model(bad_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let bad_number = text.replacen("array layer0.bias 20 1\n", "array layer0.bias 20 1\nfoo\n", 1);
        assert!(read_model(bad_number.as_bytes()).is_err());
    }
}
