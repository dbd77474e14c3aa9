use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::AtomicSystem;
use crate::{Error, Result};

/// Minimum rigid-fit residual for two classes to count as distinct.
pub const DISTINCT_RMSD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    KChain,
    RotSym,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::KChain => "k_chain",
            Family::RotSym => "rot_sym",
        })
    }
}

/// Two E(3)-distinct systems forming a binary classification task.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkInstance {
    pub family: Family,
    /// `k` for chains, `L` for rotational symmetry.
    pub param: usize,
    pub angle: Option<f64>,
    pub system_a: AtomicSystem,
    pub system_b: AtomicSystem,
}

fn carbon(positions: Vec<Vector3<f64>>) -> AtomicSystem {
    let n = positions.len();
    AtomicSystem::new(positions, vec![6; n]).expect("generated positions are valid")
}

/// `k` collinear nodes at unit spacing on x with one endpoint bonded at each
/// end, 45° out of the line in the xz plane. Class A bends both endpoints to
/// +z, class B bends the far one to −z.
pub fn gen_k_chain(k: usize) -> Result<BenchmarkInstance> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-chain needs k >= 2, got {k}")));
    }
    let a = FRAC_1_SQRT_2;
    let last = (k - 1) as f64;
    let build = |far_z: f64| {
        let mut p: Vec<_> = (0..k).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        p.push(Vector3::new(-a, 0.0, a));
        p.push(Vector3::new(last + a, 0.0, far_z));
        carbon(p)
    };
    certify(BenchmarkInstance {
        family: Family::KChain,
        param: k,
        angle: None,
        system_a: build(a),
        system_b: build(-a),
    })
}

/// Default class-B rotation for an `L`-fold ring: half the symmetry angle.
pub fn default_angle(order: usize) -> f64 {
    PI / order as f64
}

/// An `L`-fold ring of radius 1 Å at z = 0.5 above a two-atom anchor. Class
/// A has the ring at rotation 0, class B at `angle` about z.
///
/// The anchor is an O atom under the ring centre plus an N atom under the
/// first ring site, so it fixes an azimuth and the two rings are not related
/// by any rotation about z.
pub fn gen_rot_sym(order: usize, angle: f64) -> Result<BenchmarkInstance> {
    if order < 2 {
        return Err(Error::InvalidConfig(format!("rotational symmetry order must be >= 2, got {order}")));
    }
    let period = 2.0 * PI / order as f64;
    let r = angle.rem_euclid(period);
    if !angle.is_finite() || r.min(period - r) < 1e-9 {
        return Err(Error::DegenerateAngle { angle, order });
    }
    let build = |theta: f64| {
        let mut p = vec![Vector3::new(0.0, 0.0, -0.5), Vector3::new(1.0, 0.0, -0.5)];
        let mut z = vec![8, 7];
        for j in 0..order {
            let phi = theta + j as f64 * period;
            p.push(Vector3::new(phi.cos(), phi.sin(), 0.5));
            z.push(6);
        }
        AtomicSystem::new(p, z).expect("generated positions are valid")
    };
    certify(BenchmarkInstance {
        family: Family::RotSym,
        param: order,
        angle: Some(angle),
        system_a: build(0.0),
        system_b: build(angle),
    })
}

fn sorted_distances(s: &AtomicSystem) -> Vec<(u32, u32, f64)> {
    let (p, z) = (s.positions(), s.atomic_numbers());
    let mut d = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let (a, b) = if z[i] <= z[j] { (z[i], z[j]) } else { (z[j], z[i]) };
            d.push((a, b, (p[i] - p[j]).norm()));
        }
    }
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    d
}

/// Whether the element-labelled pairwise-distance multisets differ by more
/// than `tol`. Congruent systems always share this multiset.
pub fn distance_multisets_differ(a: &AtomicSystem, b: &AtomicSystem, tol: f64) -> bool {
    let (da, db) = (sorted_distances(a), sorted_distances(b));
    da.len() != db.len()
        || da
            .iter()
            .zip(&db)
            .any(|(x, y)| x.0 != y.0 || x.1 != y.1 || (x.2 - y.2).abs() > tol)
}

fn certify(instance: BenchmarkInstance) -> Result<BenchmarkInstance> {
    let (a, b) = (&instance.system_a, &instance.system_b);
    let distinct = distance_multisets_differ(a, b, 1e-6)
        || (a.len() <= 9 && min_rigid_rmsd(a, b).is_some_and(|r| r > DISTINCT_RMSD));
    if !distinct {
        return Err(Error::InvalidSystem(format!(
            "{} classes with parameter {} are not certified distinct",
            instance.family, instance.param
        )));
    }
    Ok(instance)
}

/// RMSD after the best orthogonal (reflections allowed) superposition for a
/// fixed atom correspondence.
pub fn procrustes_rmsd(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let n = a.len();
    let ca = a.iter().sum::<Vector3<f64>>() / n as f64;
    let cb = b.iter().sum::<Vector3<f64>>() / n as f64;
    let pa = DMatrix::from_fn(n, 3, |i, k| a[i][k] - ca[k]);
    let pb = DMatrix::from_fn(n, 3, |i, k| b[i][k] - cb[k]);
    let h = pa.transpose() * &pb;
    let trace: f64 = h.svd(false, false).singular_values.iter().sum();
    let sq = pa.norm_squared() + pb.norm_squared() - 2.0 * trace;
    (sq.max(0.0) / n as f64).sqrt()
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Smallest Procrustes RMSD over all element-preserving correspondences;
/// `None` if the element multisets differ.
pub fn min_rigid_rmsd(a: &AtomicSystem, b: &AtomicSystem) -> Option<f64> {
    let (za, zb) = (a.atomic_numbers(), b.atomic_numbers());
    let mut sa = za.to_vec();
    let mut sb = zb.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }
    let mut best = f64::INFINITY;
    let mut order: Vec<usize> = (0..b.len()).collect();
    permutations(&mut order, 0, &mut |perm| {
        if perm.iter().enumerate().all(|(i, &j)| za[i] == zb[j]) {
            let pb: Vec<_> = perm.iter().map(|&j| b.positions()[j]).collect();
            best = best.min(procrustes_rmsd(a.positions(), &pb));
        }
    });
    Some(best)
}
