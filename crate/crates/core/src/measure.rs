//! Finite nonnegative measures made of weighted atoms.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

impl From<[f64; 2]> for Atom {
    fn from([x, mass]: [f64; 2]) -> Self {
        Atom { x, mass }
    }
}

impl From<Atom> for [f64; 2] {
    fn from(a: Atom) -> Self {
        [a.x, a.mass]
    }
}

/// Atoms with strictly increasing locations and positive masses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Sorts, merges coincident locations and drops nonpositive masses.
    pub fn new(mut atoms: Vec<Atom>) -> Self {
        atoms.retain(|a| a.mass > 0.0);
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match out.last_mut() {
                Some(last) if last.x == a.x => last.mass += a.mass,
                _ => out.push(a),
            }
        }
        DiscreteMeasure { atoms: out }
    }

    /// No normalization; for tests of input validation.
    pub fn from_raw(atoms: Vec<Atom>) -> Self {
        DiscreteMeasure { atoms }
    }

    pub fn empty() -> Self {
        DiscreteMeasure::default()
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

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.x).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    /// Drops atoms with mass `<= tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        DiscreteMeasure {
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|a| a.mass > tol)
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DiscreteMeasure::new(
            self.atoms
                .iter()
                .map(|a| Atom {
                    x: a.x,
                    mass: a.mass * factor,
                })
                .collect(),
        )
    }

    /// Merges runs of atoms whose consecutive gaps are at most `gap` into one
    /// atom at the mass-weighted centroid.
    pub fn collapse_clusters(&self, gap: f64) -> Self {
        let mut out: Vec<Atom> = Vec::new();
        let mut acc: Option<(f64, f64, f64)> = None; // (mass, first moment, last x)
        for a in &self.atoms {
            acc = match acc {
                Some((m, mx, last)) if a.x - last <= gap => {
                    Some((m + a.mass, mx + a.mass * a.x, a.x))
                }
                Some((m, mx, _)) => {
                    out.push(Atom { x: mx / m, mass: m });
                    Some((a.mass, a.mass * a.x, a.x))
                }
                None => Some((a.mass, a.mass * a.x, a.x)),
            };
        }
        if let Some((m, mx, _)) = acc {
            out.push(Atom { x: mx / m, mass: m });
        }
        DiscreteMeasure { atoms: out }
    }

    /// Total variation after matching atoms whose locations differ by at most
    /// `match_tol`: matched pairs contribute `|α - β|`, unmatched atoms their
    /// full mass.
    pub fn matched_tv_distance(&self, other: &DiscreteMeasure, match_tol: f64) -> f64 {
        let (a, b) = (&self.atoms, &other.atoms);
        let (mut i, mut j) = (0, 0);
        let mut tv = 0.0;
        while i < a.len() && j < b.len() {
            if (a[i].x - b[j].x).abs() <= match_tol {
                tv += (a[i].mass - b[j].mass).abs();
                i += 1;
                j += 1;
            } else if a[i].x < b[j].x {
                tv += a[i].mass;
                i += 1;
            } else {
                tv += b[j].mass;
                j += 1;
            }
        }
        tv + a[i..].iter().map(|x| x.mass).sum::<f64>() + b[j..].iter().map(|x| x.mass).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sorts_merges_and_drops() {
        let m = DiscreteMeasure::new(vec![
            Atom { x: 1.0, mass: 0.5 },
            Atom { x: -1.0, mass: 0.0 },
            Atom { x: 0.0, mass: 0.25 },
            Atom { x: 1.0, mass: 0.5 },
        ]);
        assert_eq!(m.locations(), vec![0.0, 1.0]);
        assert_eq!(m.masses(), vec![0.25, 1.0]);
        assert_eq!(m.total(), 1.25);
    }

    #[test]
    fn clusters_collapse_to_centroid() {
        let m = DiscreteMeasure::new(vec![
            Atom { x: 0.0, mass: 1.0 },
            Atom { x: 0.1, mass: 3.0 },
            Atom { x: 1.0, mass: 2.0 },
        ]);
        let c = m.collapse_clusters(0.15);
        assert_eq!(c.len(), 2);
        assert!((c.atoms()[0].x - 0.075).abs() < 1e-15);
        assert_eq!(c.atoms()[0].mass, 4.0);
    }

    #[test]
    fn matched_tv() {
        let a = DiscreteMeasure::new(vec![Atom { x: 0.0, mass: 1.0 }, Atom { x: 1.0, mass: 1.0 }]);
        let b = DiscreteMeasure::new(vec![
            Atom { x: 0.01, mass: 0.9 },
            Atom { x: 2.0, mass: 0.5 },
        ]);
        assert!((a.matched_tv_distance(&b, 0.02) - (0.1 + 1.0 + 0.5)).abs() < 1e-12);
        assert_eq!(a.matched_tv_distance(&a, 0.0), 0.0);
    }
}
