//! Comma-separated data files with a `#`-commented preamble carrying the run config.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::CliError;

/// Full round-trip precision: 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_num(s: &str) -> Result<f64, CliError> {
    s.trim().parse::<f64>().map_err(|_| CliError::Data(format!("not a number: `{s}`")))
}

/// A data table: config and free-form `#!` metadata lines, a header, string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config: RunConfig,
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(config: &RunConfig, header: &[&str]) -> Self {
        Self {
            config: config.clone(),
            meta: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column `{name}`")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut preamble = String::new();
        for (k, v) in &self.meta {
            preamble.push_str(&format!("#! {k} = {v}\n"));
        }
        preamble.push_str(&self.config.as_comment());
        file.write_all(preamble.as_bytes()).map_err(|e| CliError::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header).map_err(CliError::csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::csv)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut preamble = String::new();
        let mut meta = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| CliError::io(path, e))?;
            if !line.starts_with('#') {
                break;
            }
            if let Some(kv) = line.strip_prefix("#!") {
                let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Data(format!("bad metadata line `{line}`")))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            preamble.push_str(&line);
            preamble.push('\n');
        }
        let config = RunConfig::from_comment(&preamble).map_err(|m| CliError::Data(format!("{}: embedded config: {m}", path.display())))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(CliError::csv)?;
        let header = r.headers().map_err(CliError::csv)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(CliError::csv))
            .collect::<Result<_, _>>()?;
        Ok(Self { config, meta, header, rows })
    }
}
