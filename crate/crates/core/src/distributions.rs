//! Finite discrete distributions over `R^d x {-1, +1}`.
//!
//! Label noise is applied analytically: each atom's mass is split between
//! its original and flipped label, so no sampling error ever enters.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, norm1};

/// Weights must sum to one within this slack.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Negative,
    #[serde(rename = "1")]
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = Error;

    fn try_from(y: f64) -> Result<Self> {
        if y == 1.0 {
            Ok(Label::Positive)
        } else if y == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidLabel(y))
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Negative => "-1",
            Label::Positive => "1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    x: Vec<f64>,
    y: Label,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        if x.is_empty() || x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFeatures);
        }
        Ok(Self { x, y })
    }

    pub fn positive(x: Vec<f64>) -> Result<Self> {
        Self::new(x, Label::Positive)
    }

    pub fn negative(x: Vec<f64>) -> Result<Self> {
        Self::new(x, Label::Negative)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> Label {
        self.y
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `y (v . x)`.
    pub fn margin(&self, v: &[f64]) -> f64 {
        self.y.sign() * dot(v, &self.x)
    }

    pub fn with_flipped_label(&self) -> Self {
        Self { x: self.x.clone(), y: self.y.flipped() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: LabeledPoint,
    pub weight: f64,
}

/// A probability distribution with finitely many atoms.
///
/// Invariants: at least one atom, all atoms share the dimension, weights are
/// positive and sum to one within [`MASS_TOLERANCE`], and no two atoms carry
/// the same `(x, y)` (duplicates are merged on construction by exact
/// coordinate equality).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    dim: usize,
    atoms: Vec<Atom>,
}

// -0.0 and 0.0 must land in the same bucket
fn point_key(p: &LabeledPoint) -> (Vec<u64>, Label) {
    (p.x.iter().map(|c| (c + 0.0).to_bits()).collect(), p.y)
}

impl DiscreteDistribution {
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LabeledPoint, f64)>,
    {
        let mut merged: Vec<Atom> = Vec::new();
        let mut index: HashMap<(Vec<u64>, Label), usize> = HashMap::new();
        let mut dim = None;
        for (point, weight) in atoms {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidWeights(format!("weight {weight} is not positive")));
            }
            match dim {
                None => dim = Some(point.dim()),
                Some(d) if d != point.dim() => {
                    return Err(Error::DimensionMismatch { expected: d, found: point.dim() })
                }
                _ => {}
            }
            let key = point_key(&point);
            match index.get(&key) {
                Some(&i) => merged[i].weight += weight,
                None => {
                    index.insert(key, merged.len());
                    merged.push(Atom { point, weight });
                }
            }
        }
        let dim = dim.ok_or(Error::Empty)?;
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, atoms: merged })
    }

    /// Uniform distribution over a sample (repeated points get repeated mass).
    pub fn uniform(sample: &[LabeledPoint]) -> Result<Self> {
        let w = 1.0 / sample.len() as f64;
        Self::new(sample.iter().cloned().map(|p| (p, w)))
    }

    /// Builds from unnormalized positive masses, rescaling them to sum to one.
    pub fn from_masses<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LabeledPoint, f64)>,
    {
        let atoms: Vec<_> = atoms.into_iter().collect();
        let total: f64 = atoms.iter().map(|(_, w)| *w).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidWeights(format!("total mass {total}")));
        }
        Self::new(atoms.into_iter().map(|(p, w)| (p, w / total)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Mass on the atom `(x, y)`, zero if absent.
    pub fn weight_of(&self, x: &[f64], y: Label) -> f64 {
        self.atoms.iter().find(|a| a.point.y == y && a.point.x == x).map_or(0.0, |a| a.weight)
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, found: v.len() })
        }
    }

    /// The exact `eta`-noisy version of this distribution.
    pub fn corrupt(&self, eta: f64) -> Result<Self> {
        corrupt_rcn(self, eta)
    }

    /// `E[y x]`, the label-weighted mean of the features.
    pub fn mean_label_feature(&self) -> Vec<f64> {
        mean_label_feature(self)
    }

    /// Reads `x1,...,xd,y,weight` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ncol = headers.len();
        if ncol < 3
            || &headers[ncol - 2] != "y"
            || &headers[ncol - 1] != "weight"
            || (0..ncol - 2).any(|i| headers[i] != *format!("x{}", i + 1))
        {
            return Err(Error::InvalidConfig(format!(
                "expected header x1,...,xd,y,weight, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut atoms = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let nums = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let (x, rest) = nums.split_at(ncol - 2);
            let point = LabeledPoint::new(x.to_vec(), Label::try_from(rest[0])?)?;
            atoms.push((point, rest[1]));
        }
        Self::new(atoms)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        header.push("weight".into());
        wtr.write_record(&header)?;
        for atom in &self.atoms {
            let mut row: Vec<String> = atom.point.x.iter().map(|c| c.to_string()).collect();
            row.push(atom.point.y.to_string());
            row.push(atom.weight.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }
}

fn validate_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidNoiseRate(eta))
    }
}

/// Splits every atom `((x, y), p)` into `((x, y), (1 - eta) p)` and
/// `((x, -y), eta p)`, merging atoms that collide.
pub fn corrupt_rcn(clean: &DiscreteDistribution, eta: f64) -> Result<DiscreteDistribution> {
    validate_eta(eta)?;
    DiscreteDistribution::new(
        clean
            .atoms
            .iter()
            .flat_map(|a| [(a.point.clone(), (1.0 - eta) * a.weight), (a.point.with_flipped_label(), eta * a.weight)]),
    )
}

/// Normalized margin of a separator together with the separator itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCertificate {
    pub separator: Vec<f64>,
    pub margin: f64,
}

/// `min_atoms y (w . x) / ||w||_1`. Negative when `w` misclassifies an atom.
pub fn l1_margin(dist: &DiscreteDistribution, w: &[f64]) -> Result<f64> {
    dist.check_dim(w)?;
    let scale = norm1(w);
    if scale == 0.0 {
        return Err(Error::ZeroVector);
    }
    let unit: Vec<f64> = w.iter().map(|c| c / scale).collect();
    Ok(dist.atoms.iter().map(|a| a.point.margin(&unit)).fold(f64::INFINITY, f64::min))
}

pub fn margin_certificate(dist: &DiscreteDistribution, w: &[f64]) -> Result<MarginCertificate> {
    let margin = l1_margin(dist, w)?;
    Ok(MarginCertificate { separator: w.to_vec(), margin })
}

/// Three positively labelled atoms in the unit disc:
/// `(1, 0)` with mass 1/4, `(gamma, sqrt(1 - gamma^2))` with mass 1/4 and
/// `(gamma, -2 gamma)` with mass 1/2.
///
/// `(1, 0)` separates it with L1 margin `gamma`, yet for small `gamma` the
/// nearest-centroid direction misclassifies the heavy third atom.
pub fn make_counterexample(gamma: f64) -> Result<DiscreteDistribution> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let [a, b, c] = counterexample_points(gamma);
    DiscreteDistribution::new([
        (LabeledPoint::positive(a.to_vec())?, 0.25),
        (LabeledPoint::positive(b.to_vec())?, 0.25),
        (LabeledPoint::positive(c.to_vec())?, 0.5),
    ])
}

/// Feature points of [`make_counterexample`], in order.
pub fn counterexample_points(gamma: f64) -> [[f64; 2]; 3] {
    [[1.0, 0.0], [gamma, (1.0 - gamma * gamma).sqrt()], [gamma, -2.0 * gamma]]
}

pub fn mean_label_feature(dist: &DiscreteDistribution) -> Vec<f64> {
    let mut m = vec![0.0; dist.dim];
    for atom in &dist.atoms {
        let c = atom.weight * atom.point.y.sign();
        for (mi, xi) in m.iter_mut().zip(&atom.point.x) {
            *mi += c * xi;
        }
    }
    m
}
