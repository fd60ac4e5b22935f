//! Particle CSV files.
//!
//! Columns are `index,seed,<parameters>,<summaries>` followed by `label`
//! (stage-1 and stage-2 survivor files) and `prob` (screened files). Posterior
//! files drop the label since every row is accepted. Floats are written in
//! shortest round-trip form, so a file read back reproduces the particles.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Label, Particle, PriorSpec};
use crate::error::{Error, Result};
use crate::stats::SummarySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `...,label`
    Labelled,
    /// `...,label,prob`
    Screened,
    /// No label column; every row is an accepted particle.
    Posterior,
}

impl Layout {
    fn tail(self) -> &'static [&'static str] {
        match self {
            Layout::Labelled => &["label"],
            Layout::Screened => &["label", "prob"],
            Layout::Posterior => &[],
        }
    }
}

pub struct ParticleWriter<W: Write> {
    inner: csv::Writer<W>,
    layout: Layout,
    width: usize,
}

fn header(priors: &[PriorSpec], specs: &[SummarySpec], layout: Layout) -> Vec<String> {
    let mut cols = vec!["index".to_string(), "seed".to_string()];
    cols.extend(priors.iter().map(|p| p.name.clone()));
    cols.extend(specs.iter().map(|s| s.name.clone()));
    cols.extend(layout.tail().iter().map(|s| s.to_string()));
    cols
}

impl ParticleWriter<BufWriter<File>> {
    pub fn create(
        path: impl AsRef<Path>,
        priors: &[PriorSpec],
        specs: &[SummarySpec],
        layout: Layout,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufWriter::new(file), priors, specs, layout)
    }
}

impl<W: Write> ParticleWriter<W> {
    pub fn new(out: W, priors: &[PriorSpec], specs: &[SummarySpec], layout: Layout) -> Result<Self> {
        let cols = header(priors, specs, layout);
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(&cols)?;
        Ok(Self {
            inner,
            layout,
            width: cols.len(),
        })
    }

    pub fn write(&mut self, p: &Particle) -> Result<()> {
        let mut row = Vec::with_capacity(self.width);
        row.push(p.index.to_string());
        row.push(p.seed.to_string());
        row.extend(p.params.iter().map(f64::to_string));
        row.extend(p.summaries.iter().map(|s| s.value.to_string()));
        if self.layout != Layout::Posterior {
            row.push(
                match p.label {
                    Label::Accepted => "1",
                    Label::Rejected => "0",
                    Label::Unevaluated => "",
                }
                .to_string(),
            );
        }
        if self.layout == Layout::Screened {
            row.push(p.probability.map(|v| v.to_string()).unwrap_or_default());
        }
        if row.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: row.len(),
            });
        }
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn write_all<'a>(&mut self, particles: impl IntoIterator<Item = &'a Particle>) -> Result<()> {
        particles.into_iter().try_for_each(|p| self.write(p))
    }

    /// Flushes and returns the underlying writer.
    pub fn finish(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::InvalidInput(format!("flushing particle CSV: {}", e.error())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleTable {
    pub layout: Layout,
    pub particles: Vec<Particle>,
}

fn parse<T: std::str::FromStr>(field: &str, column: &str, line: u64) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::InvalidInput(format!("line {line}, column {column:?}: cannot parse {field:?}")))
}

/// Reads a particle CSV written by [`ParticleWriter`]. The header must name
/// exactly the given priors and summaries; the layout is inferred from the
/// trailing columns.
pub fn read_particles<R: Read>(
    input: R,
    priors: &[PriorSpec],
    specs: &[SummarySpec],
) -> Result<ParticleTable> {
    let mut reader = csv::Reader::from_reader(input);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let layout = [Layout::Labelled, Layout::Screened, Layout::Posterior]
        .into_iter()
        .find(|&l| header(priors, specs, l) == found)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "unexpected particle CSV header {:?}; expected {:?}",
                found.join(","),
                header(priors, specs, Layout::Labelled).join(",")
            ))
        })?;

    let n_params = priors.len();
    let mut particles = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let f = |k: usize| &record[k];
        let index = parse(f(0), "index", line)?;
        let seed = parse(f(1), "seed", line)?;
        let params = (0..n_params)
            .map(|k| parse(f(2 + k), &priors[k].name, line))
            .collect::<Result<Vec<f64>>>()?;
        for (v, prior) in params.iter().zip(priors) {
            if !prior.contains(*v) {
                return Err(Error::InvalidInput(format!(
                    "line {line}: {} = {v} lies outside its prior",
                    prior.name
                )));
            }
        }
        let values = specs
            .iter()
            .enumerate()
            .map(|(k, s)| parse(f(2 + n_params + k), &s.name, line))
            .collect::<Result<Vec<f64>>>()?;
        let mut p = Particle::new(index, seed, params, priors);
        let tail = 2 + n_params + specs.len();
        match layout {
            Layout::Posterior => {
                p.set_summaries(specs, &values);
            }
            Layout::Labelled | Layout::Screened => {
                p.summaries = specs.iter().zip(&values).map(|(s, &v)| s.evaluate(v)).collect();
                p.label = match f(tail) {
                    "1" => Label::Accepted,
                    "0" => Label::Rejected,
                    "" => Label::Unevaluated,
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "line {line}: label must be 1, 0 or empty, got {other:?}"
                        )))
                    }
                };
            }
        }
        if layout == Layout::Screened && !f(tail + 1).is_empty() {
            p.probability = Some(parse(f(tail + 1), "prob", line)?);
        }
        particles.push(p);
    }
    Ok(ParticleTable { layout, particles })
}

/// [`read_particles`] from a file.
pub fn load_particles(
    path: impl AsRef<Path>,
    priors: &[PriorSpec],
    specs: &[SummarySpec],
) -> Result<ParticleTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_particles(file, priors, specs).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Vec<PriorSpec>, Vec<SummarySpec>, Vec<Particle>) {
        let priors = vec![PriorSpec::uniform("beta", 0.0, 6.0), PriorSpec::log_uniform("eps", -6.0, 0.0)];
        let specs = vec![SummarySpec::below("ss", 10.0).unwrap()];
        let mut a = Particle::new(0, 42, vec![1.0 / 3.0, 1e-5], &priors);
        a.set_summaries(&specs, &[0.1 + 0.2]);
        let mut b = Particle::new(1, u64::MAX, vec![5.999, 0.5], &priors);
        b.set_summaries(&specs, &[f64::NAN]);
        b.probability = Some(0.25);
        (priors, specs, vec![a, b])
    }

    fn write(layout: Layout) -> String {
        let (priors, specs, ps) = setup();
        let mut w = ParticleWriter::new(Vec::new(), &priors, &specs, layout).unwrap();
        w.write_all(&ps).unwrap();
        String::from_utf8(w.finish().unwrap()).unwrap()
    }

    #[test]
    fn header_and_rows() {
        let text = write(Layout::Screened);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,seed,beta,eps,ss,label,prob"));
        assert_eq!(lines.next(), Some("0,42,0.3333333333333333,0.00001,0.30000000000000004,1,"));
        assert_eq!(lines.next(), Some("1,18446744073709551615,5.999,0.5,NaN,0,0.25"));
        assert!(write(Layout::Posterior).starts_with("index,seed,beta,eps,ss\n"));
    }

    #[test]
    fn round_trip() {
        let (priors, specs, ps) = setup();
        for layout in [Layout::Labelled, Layout::Screened] {
            let table = read_particles(write(layout).as_bytes(), &priors, &specs).unwrap();
            assert_eq!(table.layout, layout);
            assert_eq!(table.particles.len(), 2);
            for (x, y) in table.particles.iter().zip(&ps) {
                assert_eq!((x.index, x.seed, &x.params, &x.sampling, x.label), (y.index, y.seed, &y.params, &y.sampling, y.label));
                if layout == Layout::Screened {
                    assert_eq!(x.probability, y.probability);
                }
            }
            assert!(table.particles[1].summaries[0].value.is_nan());
        }
    }

    #[test]
    fn rejects_bad_files() {
        let (priors, specs, _) = setup();
        assert!(read_particles("index,seed,beta,ss,label\n".as_bytes(), &priors, &specs).is_err());
        let bad_label = "index,seed,beta,eps,ss,label\n0,1,1.0,0.5,3,yes\n";
        assert!(read_particles(bad_label.as_bytes(), &priors, &specs).is_err());
        let outside = "index,seed,beta,eps,ss,label\n0,1,7.0,0.5,3,1\n";
        assert!(read_particles(outside.as_bytes(), &priors, &specs).is_err());
        let junk = "index,seed,beta,eps,ss,label\n0,1,abc,0.5,3,1\n";
        let err = read_particles(junk.as_bytes(), &priors, &specs).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
