//! Run configuration: defaults, flat key-value config files, and flag
//! overrides. Flags win over the file, the file over defaults.

use fpqkd_core::HeraldClass;
use std::fmt::Write as _;
use std::path::PathBuf;

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Pair parameters to sweep (ignored when a lambda scan is set).
    pub lambdas: Vec<f64>,
    /// Logarithmic lambda grid (min, max, steps) for sweeps, and the
    /// search range for `optimize`.
    pub lambda_scan: Option<(f64, f64, usize)>,
    pub eta_h: f64,
    pub dark_h: f64,
    /// Pair-number truncation order; None picks the smallest order that
    /// meets the tail tolerance, never below 10.
    pub n_cut: Option<usize>,
    pub alpha: f64,
    pub eta_d: f64,
    pub dark_b: f64,
    pub e_d: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub distance_step: f64,
    pub q: f64,
    pub f: f64,
    pub pulse_rate: f64,
    pub keygen: Vec<HeraldClass>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.001],
            lambda_scan: None,
            eta_h: 0.65,
            dark_h: 1e-6,
            n_cut: None,
            alpha: 0.2,
            eta_d: 0.65,
            dark_b: 1e-6,
            e_d: 0.015,
            distance_min: 0.0,
            distance_max: 250.0,
            distance_step: 1.0,
            q: 0.5,
            f: 1.16,
            pulse_rate: 1e6,
            keygen: vec![
                HeraldClass::H,
                HeraldClass::V,
                HeraldClass::PLUS,
                HeraldClass::MINUS,
            ],
            out: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {value:?}"))
}

fn parse_class(token: &str) -> Result<HeraldClass, String> {
    HeraldClass::all()
        .into_iter()
        .find(|c| c.column_key() == token)
        .ok_or_else(|| format!("unknown herald class {token:?} (use h, v, p, m, ...)"))
}

impl RunConfig {
    /// Apply one `key = value` pair from a config file.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "lambda" => {
                self.lambdas = value
                    .split(',')
                    .map(|tok| parse_f64("lambda", tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "lambda_min" => {
                let (_, hi, steps) = self.scan_or_default();
                self.lambda_scan = Some((parse_f64(key, value)?, hi, steps));
            }
            "lambda_max" => {
                let (lo, _, steps) = self.scan_or_default();
                self.lambda_scan = Some((lo, parse_f64(key, value)?, steps));
            }
            "lambda_steps" => {
                let (lo, hi, _) = self.scan_or_default();
                let steps = value
                    .parse::<usize>()
                    .map_err(|_| format!("{key}: expected an integer, got {value:?}"))?;
                self.lambda_scan = Some((lo, hi, steps));
            }
            "eta_h" => self.eta_h = parse_f64(key, value)?,
            "eta_d" => self.eta_d = parse_f64(key, value)?,
            "dark" => {
                let d = parse_f64(key, value)?;
                self.dark_h = d;
                self.dark_b = d;
            }
            "dark_h" => self.dark_h = parse_f64(key, value)?,
            "dark_b" => self.dark_b = parse_f64(key, value)?,
            "n_cut" => {
                self.n_cut = if value == "auto" {
                    None
                } else {
                    Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| format!("{key}: expected an integer or 'auto'"))?,
                    )
                };
            }
            "alpha" => self.alpha = parse_f64(key, value)?,
            "e_d" => self.e_d = parse_f64(key, value)?,
            "distance_min" => self.distance_min = parse_f64(key, value)?,
            "distance_max" => self.distance_max = parse_f64(key, value)?,
            "distance_step" => self.distance_step = parse_f64(key, value)?,
            "q" => self.q = parse_f64(key, value)?,
            "f" => self.f = parse_f64(key, value)?,
            "pulse_rate" => self.pulse_rate = parse_f64(key, value)?,
            "keygen_classes" => {
                self.keygen = value
                    .split(',')
                    .map(|tok| parse_class(tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn scan_or_default(&self) -> (f64, f64, usize) {
        self.lambda_scan.unwrap_or((1e-3, 0.3, 40))
    }

    /// Parse a flat key=value config file body.
    pub fn apply_file(&mut self, body: &str, path: &str) -> Result<(), String> {
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{path}:{}: expected key = value", lineno + 1))?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| format!("{path}:{}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    /// The distance grid, inclusive of both ends up to rounding.
    pub fn distance_grid(&self) -> Result<Vec<f64>, String> {
        if self.distance_step <= 0.0 {
            return Err(format!(
                "distance grid is empty (distance-step {} must be positive)",
                self.distance_step
            ));
        }
        if self.distance_max < self.distance_min {
            return Err(format!(
                "distance grid is empty (distance-min {} exceeds distance-max {})",
                self.distance_min, self.distance_max
            ));
        }
        let mut grid = Vec::new();
        let mut i = 0usize;
        loop {
            let l = self.distance_min + i as f64 * self.distance_step;
            if l > self.distance_max + 1e-9 {
                break;
            }
            grid.push(l);
            i += 1;
        }
        Ok(grid)
    }

    /// Lambda values for a sweep: the explicit list, or the logarithmic
    /// scan grid when one is configured.
    pub fn lambda_values(&self) -> Result<Vec<f64>, String> {
        if let Some((lo, hi, steps)) = self.lambda_scan {
            if !(lo > 0.0 && lo < hi && hi <= 1.0) {
                return Err(format!(
                    "lambda scan ({lo}, {hi}) must satisfy 0 < min < max <= 1"
                ));
            }
            if steps < 2 {
                return Err(format!("lambda-steps {steps} must be at least 2"));
            }
            let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
            return Ok((0..steps)
                .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (steps - 1) as f64).exp())
                .collect());
        }
        if self.lambdas.is_empty() {
            return Err("lambda list is empty".to_string());
        }
        Ok(self.lambdas.clone())
    }

    /// Resolved-configuration comment block stamped at the top of every
    /// emitted file.
    pub fn comment_block(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fpqkd {command}");
        let _ = writeln!(s, "# lambda = {}", join_f64(&self.lambdas));
        match self.lambda_scan {
            Some((lo, hi, steps)) => {
                let _ = writeln!(s, "# lambda_scan = {lo},{hi},{steps}");
            }
            None => {
                let _ = writeln!(s, "# lambda_scan = none");
            }
        }
        let _ = writeln!(s, "# eta_h = {}", self.eta_h);
        let _ = writeln!(s, "# dark_h = {}", self.dark_h);
        match self.n_cut {
            Some(n) => {
                let _ = writeln!(s, "# n_cut = {n}");
            }
            None => {
                let _ = writeln!(s, "# n_cut = auto");
            }
        }
        let _ = writeln!(s, "# alpha = {}", self.alpha);
        let _ = writeln!(s, "# eta_d = {}", self.eta_d);
        let _ = writeln!(s, "# dark_b = {}", self.dark_b);
        let _ = writeln!(s, "# e_d = {}", self.e_d);
        let _ = writeln!(
            s,
            "# distance_grid = {}..{} step {}",
            self.distance_min, self.distance_max, self.distance_step
        );
        let _ = writeln!(s, "# q = {}", self.q);
        let _ = writeln!(s, "# f = {}", self.f);
        let _ = writeln!(s, "# pulse_rate = {}", self.pulse_rate);
        let keys: Vec<&str> = self.keygen.iter().map(|c| c.column_key()).collect();
        let _ = writeln!(s, "# keygen_classes = {}", keys.join(","));
        s
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
