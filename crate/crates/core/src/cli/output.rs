use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use super::config::RunConfig;
use crate::error::Result;
use crate::kinetic::PhaseField;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
}

/// Writes result files into the run's output directory, each tagged with the
/// same metadata.
pub struct Emitter {
    dir: PathBuf,
    pub meta: Metadata,
    config: RunConfig,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    metadata: &'a Metadata,
    config: &'a RunConfig,
    result: &'a T,
}

impl Emitter {
    pub fn new(config: &RunConfig, command: &str, threads: usize) -> Result<Self> {
        fs::create_dir_all(&config.output)?;
        Ok(Self {
            dir: config.output.clone(),
            meta: Metadata {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_sha256: config.hash(),
                seed: config.seed,
                threads,
            },
            config: config.clone(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let env = Envelope {
            metadata: &self.meta,
            config: &self.config,
            result,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| crate::Error::Numerical(e.to_string()))?;
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn header(&self, w: &mut impl Write, columns: &[&str]) -> Result<()> {
        writeln!(
            w,
            "# {} {} command={} config_sha256={} seed={}",
            self.meta.tool, self.meta.version, self.meta.command, self.meta.config_sha256, self.meta.seed
        )?;
        writeln!(w, "{}", columns.join(","))?;
        Ok(())
    }

    /// Numeric table; `None` cells are left empty.
    pub fn csv<I>(&mut self, name: &str, columns: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<Option<f64>>>,
    {
        let mut w = self.create(name)?;
        self.header(&mut w, columns)?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Flattened field with columns `i,j,k,x,y,alpha,f`.
    pub fn field_csv(&mut self, name: &str, f: &PhaseField) -> Result<()> {
        let mut w = self.create(name)?;
        self.header(&mut w, &["i", "j", "k", "x", "y", "alpha", "f"])?;
        let g = &*f.grid;
        for (c, v) in f.values.iter().enumerate() {
            let k = c % g.nalpha;
            let ij = c / g.nalpha;
            let (i, j) = (ij / g.ny(), ij % g.ny());
            let (x, y, a) = g.coords(c);
            writeln!(w, "{i},{j},{k},{x},{y},{a},{v}")?;
        }
        w.flush()?;
        Ok(())
    }
}
