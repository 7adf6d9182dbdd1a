//! Genotype layout and the genotype -> phenotype mapping.
//!
//! A chromosome is one flat real vector laid out as
//!
//! ```text
//! [ thermal genes (row-major, plant x hour) | pump genes (row-major) | preference | max-change ]
//! ```
//!
//! A thermal gene that is not strictly positive means the plant is halted at
//! that hour. Pump genes are the signed hydro output (negative = pumping).

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

use crate::model::ProblemInstance;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("genome length {got} does not match layout length {expected}")]
    Length { expected: usize, got: usize },
    #[error("gene {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("schedule csv: {0}")]
    Csv(String),
}

/// Sizes that fix the genome layout for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_thermal: usize,
    pub n_hydro: usize,
    pub steps: usize,
}

impl Layout {
    pub fn of(inst: &ProblemInstance) -> Self {
        Self { n_thermal: inst.thermal.len(), n_hydro: inst.hydro.len(), steps: inst.steps() }
    }

    pub fn genome_len(&self) -> usize {
        (self.n_thermal + self.n_hydro) * self.steps + self.n_thermal + 1
    }

    #[inline]
    pub fn thermal_index(&self, i: usize, t: usize) -> usize {
        i * self.steps + t
    }

    #[inline]
    pub fn pump_index(&self, j: usize, t: usize) -> usize {
        (self.n_thermal + j) * self.steps + t
    }

    #[inline]
    pub fn preference_offset(&self) -> usize {
        (self.n_thermal + self.n_hydro) * self.steps
    }

    #[inline]
    pub fn max_change_index(&self) -> usize {
        self.genome_len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    layout: Layout,
    genes: Vec<f64>,
}

impl Chromosome {
    pub fn new(layout: Layout, genes: Vec<f64>) -> Result<Self, EncodingError> {
        if genes.len() != layout.genome_len() {
            return Err(EncodingError::Length { expected: layout.genome_len(), got: genes.len() });
        }
        if let Some((index, &value)) = genes.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EncodingError::NonFinite { index, value });
        }
        Ok(Self { layout, genes })
    }

    /// Builds a chromosome from its four parts.
    pub fn from_parts(
        thermal: &Array2<f64>,
        pump: &Array2<f64>,
        preference: &[f64],
        max_change_gene: f64,
    ) -> Result<Self, EncodingError> {
        let (n_thermal, steps) = thermal.dim();
        let (n_hydro, pump_steps) = pump.dim();
        if n_hydro > 0 && pump_steps != steps {
            return Err(EncodingError::Dimensions(format!(
                "thermal has {steps} hours, pump has {pump_steps}"
            )));
        }
        if preference.len() != n_thermal {
            return Err(EncodingError::Dimensions(format!(
                "preference has {} entries for {n_thermal} thermal plants",
                preference.len()
            )));
        }
        let layout = Layout { n_thermal, n_hydro, steps };
        let mut genes = Vec::with_capacity(layout.genome_len());
        genes.extend(thermal.iter());
        genes.extend(pump.iter());
        genes.extend_from_slice(preference);
        genes.push(max_change_gene);
        Self::new(layout, genes)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn into_genes(self) -> Vec<f64> {
        self.genes
    }

    #[inline]
    pub fn thermal_gene(&self, i: usize, t: usize) -> f64 {
        self.genes[self.layout.thermal_index(i, t)]
    }

    #[inline]
    pub fn pump_gene(&self, j: usize, t: usize) -> f64 {
        self.genes[self.layout.pump_index(j, t)]
    }

    pub fn preference(&self) -> &[f64] {
        let off = self.layout.preference_offset();
        &self.genes[off..off + self.layout.n_thermal]
    }

    pub fn max_change_gene(&self) -> f64 {
        self.genes[self.layout.max_change_index()]
    }

    /// Largest output change one plant may make in a single repair visit:
    /// `max(1, round(|gene|))`.
    pub fn max_change(&self) -> f64 {
        self.max_change_gene().abs().round().max(1.0)
    }

    /// Thermal plant indices in repair priority: highest preference first,
    /// ties by lower index.
    pub fn repair_order(&self) -> Vec<usize> {
        let pref = self.preference();
        let mut order: Vec<usize> = (0..pref.len()).collect();
        order.sort_by(|&a, &b| pref[b].total_cmp(&pref[a]).then(a.cmp(&b)));
        order
    }

    fn check_instance(&self, inst: &ProblemInstance) -> Result<(), EncodingError> {
        let expected = Layout::of(inst);
        if self.layout != expected {
            return Err(EncodingError::Dimensions(format!(
                "chromosome layout {:?} vs instance {:?}",
                self.layout, expected
            )));
        }
        Ok(())
    }
}

/// Post-repair phenotype: commitment, outputs and reservoir levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Commitment flags, plant x hour.
    pub u: Array2<bool>,
    /// Thermal output, zero wherever `u` is false.
    pub g: Array2<f64>,
    /// Hydro output, negative while pumping.
    pub hg: Array2<f64>,
    /// End-of-hour reservoir level.
    pub hv: Array2<f64>,
}

impl Schedule {
    /// All thermal off, all hydro idle.
    pub fn idle(inst: &ProblemInstance) -> Self {
        let l = Layout::of(inst);
        let mut s = Self {
            u: Array2::from_elem((l.n_thermal, l.steps), false),
            g: Array2::zeros((l.n_thermal, l.steps)),
            hg: Array2::zeros((l.n_hydro, l.steps)),
            hv: Array2::zeros((l.n_hydro, l.steps)),
        };
        s.recompute_levels(inst);
        s
    }

    pub fn steps(&self) -> usize {
        self.g.ncols()
    }

    /// Rolls reservoir levels forward from each plant's initial level.
    pub fn recompute_levels(&mut self, inst: &ProblemInstance) {
        for (j, plant) in inst.hydro.iter().enumerate() {
            let mut level = plant.hv_initial;
            for t in 0..self.hg.ncols() {
                level = plant.next_level(level, self.hg[[j, t]]);
                self.hv[[j, t]] = level;
            }
        }
    }

    /// Level at the end of hour `t - 1`, i.e. the initial level for `t = 0`.
    #[inline]
    pub fn level_before(&self, inst: &ProblemInstance, j: usize, t: usize) -> f64 {
        if t == 0 {
            inst.hydro[j].hv_initial
        } else {
            self.hv[[j, t - 1]]
        }
    }

    /// Sets plant `i` halted at hour `t`.
    pub fn turn_off(&mut self, i: usize, t: usize) {
        self.u[[i, t]] = false;
        self.g[[i, t]] = 0.0;
    }

    pub fn check_instance(&self, inst: &ProblemInstance) -> Result<(), EncodingError> {
        let l = Layout::of(inst);
        let ok = self.u.dim() == (l.n_thermal, l.steps)
            && self.g.dim() == (l.n_thermal, l.steps)
            && self.hg.dim() == (l.n_hydro, l.steps)
            && self.hv.dim() == (l.n_hydro, l.steps);
        if ok {
            Ok(())
        } else {
            Err(EncodingError::Dimensions(format!(
                "schedule shape g {:?} hg {:?} vs instance {:?}",
                self.g.dim(),
                self.hg.dim(),
                l
            )))
        }
    }

    /// Writes `t,u_1..,g_1..,hg_1..,hv_1..` with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let (n_thermal, steps) = self.g.dim();
        let n_hydro = self.hg.nrows();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n_thermal).map(|i| format!("u_{i}")));
        header.extend((1..=n_thermal).map(|i| format!("g_{i}")));
        header.extend((1..=n_hydro).map(|j| format!("hg_{j}")));
        header.extend((1..=n_hydro).map(|j| format!("hv_{j}")));
        out.write_record(&header)?;
        for t in 0..steps {
            let mut row = vec![t.to_string()];
            row.extend((0..n_thermal).map(|i| u8::from(self.u[[i, t]]).to_string()));
            row.extend((0..n_thermal).map(|i| self.g[[i, t]].to_string()));
            row.extend((0..n_hydro).map(|j| self.hg[[j, t]].to_string()));
            row.extend((0..n_hydro).map(|j| self.hv[[j, t]].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a schedule written by [`Schedule::write_csv`] for `inst`.
    pub fn read_csv<R: Read>(r: R, inst: &ProblemInstance) -> Result<Self, EncodingError> {
        let csv_err = |e: csv::Error| EncodingError::Csv(e.to_string());
        let l = Layout::of(inst);
        let mut rdr = csv::Reader::from_reader(r);
        let width = rdr.headers().map_err(csv_err)?.len();
        let expected = 1 + 2 * l.n_thermal + 2 * l.n_hydro;
        if width != expected {
            return Err(EncodingError::Csv(format!("expected {expected} columns, found {width}")));
        }
        let mut s = Schedule::idle(inst);
        let mut rows = 0;
        for (t, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if t >= l.steps {
                return Err(EncodingError::Csv(format!("more than {} rows", l.steps)));
            }
            let num = |k: usize| -> Result<f64, EncodingError> {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EncodingError::Csv(format!("row {t} column {k}: {e}")))
            };
            for i in 0..l.n_thermal {
                s.u[[i, t]] = num(1 + i)? != 0.0;
                s.g[[i, t]] = num(1 + l.n_thermal + i)?;
            }
            for j in 0..l.n_hydro {
                s.hg[[j, t]] = num(1 + 2 * l.n_thermal + j)?;
                s.hv[[j, t]] = num(1 + 2 * l.n_thermal + l.n_hydro + j)?;
            }
            rows += 1;
        }
        if rows != l.steps {
            return Err(EncodingError::Csv(format!("expected {} rows, found {rows}", l.steps)));
        }
        Ok(s)
    }
}

/// Maps a chromosome onto its (pre-repair) schedule.
pub fn decode(c: &Chromosome, inst: &ProblemInstance) -> Result<Schedule, EncodingError> {
    c.check_instance(inst)?;
    let l = c.layout();
    let mut s = Schedule::idle(inst);
    for i in 0..l.n_thermal {
        for t in 0..l.steps {
            let gene = c.thermal_gene(i, t);
            if gene > 0.0 {
                s.u[[i, t]] = true;
                s.g[[i, t]] = gene;
            }
        }
    }
    for j in 0..l.n_hydro {
        for t in 0..l.steps {
            s.hg[[j, t]] = c.pump_gene(j, t);
        }
    }
    s.recompute_levels(inst);
    Ok(s)
}

/// Gene written for a halted hour: strictly negative.
pub fn off_marker(g_min: f64) -> f64 {
    if g_min > 0.0 {
        -g_min
    } else {
        -1.0
    }
}

/// Writes a (repaired) schedule back into genotype space, keeping the
/// repair-control genes of `old`.
pub fn encode_from_schedule(
    s: &Schedule,
    old: &Chromosome,
    inst: &ProblemInstance,
) -> Result<Chromosome, EncodingError> {
    old.check_instance(inst)?;
    s.check_instance(inst)?;
    let l = old.layout();
    let mut genes = old.genes.clone();
    for (i, plant) in inst.thermal.iter().enumerate() {
        for t in 0..l.steps {
            genes[l.thermal_index(i, t)] = if s.u[[i, t]] {
                s.g[[i, t]].max(f64::MIN_POSITIVE)
            } else {
                off_marker(plant.g_min)
            };
        }
    }
    for j in 0..l.n_hydro {
        for t in 0..l.steps {
            genes[l.pump_index(j, t)] = s.hg[[j, t]];
        }
    }
    Chromosome::new(l, genes)
}
