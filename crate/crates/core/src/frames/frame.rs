use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{AtomicSystem, EuclideanTransform};
use crate::{Error, Result};

/// Relative eigenvalue gap below which a frame is flagged degenerate.
pub const DEGENERACY_GAP: f64 = 1e-6;
const EIGEN_FLOOR: f64 = 1e-12;

/// Groups a PCA frame can be built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameGroup {
    E3,
    SE3,
    #[serde(rename = "Z_AXIS_2D")]
    ZAxis2D,
}

impl FrameGroup {
    /// Frame size on non-degenerate input.
    pub fn cardinality(self) -> usize {
        match self {
            FrameGroup::E3 => 8,
            FrameGroup::SE3 => 4,
            FrameGroup::ZAxis2D => 2,
        }
    }
}

impl fmt::Display for FrameGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameGroup::E3 => "E3",
            FrameGroup::SE3 => "SE3",
            FrameGroup::ZAxis2D => "Z_AXIS_2D",
        })
    }
}

impl FromStr for FrameGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E3" | "E(3)" => Ok(FrameGroup::E3),
            "SE3" | "SE(3)" => Ok(FrameGroup::SE3),
            "Z_AXIS_2D" | "Z2D" | "2D" => Ok(FrameGroup::ZAxis2D),
            other => Err(Error::InvalidConfig(format!("no frame for group '{other}'"))),
        }
    }
}

/// PCA frame of an atomic system: the transforms `(U, t)` with `t` the
/// centroid and `U` the covariance eigenvectors up to column signs.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub elements: Vec<EuclideanTransform>,
    /// Descending; three entries for 3D groups, two for the z-axis group.
    pub eigenvalues: Vec<f64>,
    pub group: FrameGroup,
    pub degenerate: bool,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        *self.elements[0].translation()
    }
}

/// Flip `v` so its largest-magnitude entry is positive (first index wins ties).
fn canonical_sign<const N: usize>(v: &mut nalgebra::SVector<f64, N>) {
    let mut best = 0;
    for i in 1..N {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn is_degenerate(eigenvalues: &[f64]) -> bool {
    let scale = eigenvalues[0].max(EIGEN_FLOOR);
    eigenvalues
        .windows(2)
        .any(|w| (w[0] - w[1]) / scale < DEGENERACY_GAP)
}

fn centred_covariance(system: &AtomicSystem, t: &Vector3<f64>) -> Matrix3<f64> {
    system
        .positions()
        .iter()
        .map(|p| {
            let d = p - t;
            d * d.transpose()
        })
        .sum()
}

/// Eigenvectors as columns, sorted by descending eigenvalue.
fn sorted_eigen3(cov: Matrix3<f64>) -> (Vec<f64>, Matrix3<f64>) {
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = Matrix3::zeros();
    for (col, &k) in order.iter().enumerate() {
        let mut v: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        canonical_sign(&mut v);
        basis.set_column(col, &v);
    }
    (order.iter().map(|&k| eig.eigenvalues[k]).collect(), basis)
}

fn sorted_eigen2(cov: Matrix2<f64>) -> (Vec<f64>, Matrix3<f64>) {
    let eig = SymmetricEigen::new(cov);
    let order = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        [0, 1]
    } else {
        [1, 0]
    };
    let mut basis = Matrix3::zeros();
    for (col, &k) in order.iter().enumerate() {
        let mut v: nalgebra::Vector2<f64> = eig.eigenvectors.column(k).into_owned();
        canonical_sign(&mut v);
        basis[(0, col)] = v[0];
        basis[(1, col)] = v[1];
    }
    basis[(2, 2)] = 1.0;
    (order.iter().map(|&k| eig.eigenvalues[k]).collect(), basis)
}

/// Build the PCA frame of `system` for `group`.
///
/// Degenerate spectra (relative eigenvalue gap below [`DEGENERACY_GAP`],
/// which includes single atoms and collinear systems) are flagged and fall
/// back to the single element `(I, t)`.
pub fn compute_frame(system: &AtomicSystem, group: FrameGroup) -> Frame {
    let t = system.centroid();
    let cov = centred_covariance(system, &t);
    let (eigenvalues, basis) = match group {
        FrameGroup::E3 | FrameGroup::SE3 => sorted_eigen3(cov),
        FrameGroup::ZAxis2D => sorted_eigen2(cov.fixed_view::<2, 2>(0, 0).into_owned()),
    };
    let degenerate = is_degenerate(&eigenvalues);
    if degenerate {
        return Frame {
            elements: vec![EuclideanTransform::new_unchecked(Matrix3::identity(), t)],
            eigenvalues,
            group,
            degenerate,
        };
    }

    let flippable = if group == FrameGroup::ZAxis2D { 2 } else { 3 };
    let mut elements = Vec::with_capacity(8);
    for mask in 0u32..(1 << flippable) {
        let mut u = basis;
        for col in 0..flippable {
            if mask & (1 << col) != 0 {
                u.column_mut(col).neg_mut();
            }
        }
        if group != FrameGroup::E3 && u.determinant() < 0.0 {
            continue;
        }
        elements.push(EuclideanTransform::new_unchecked(u, t));
    }
    Frame {
        elements,
        eigenvalues,
        group,
        degenerate,
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Plain-text form used in audit logs:
///
/// ```text
/// frame group=E3 degenerate=false elements=8
/// translation <tx> <ty> <tz>
/// eigenvalues <λ1> <λ2> [<λ3>]
/// rotation 0 <u00> <u01> <u02> <u10> ... <u22>
/// ...
/// ```
///
/// Rotation entries are row-major; numbers use shortest round-trip notation.
pub fn frame_to_text(frame: &Frame) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "frame group={} degenerate={} elements={}",
        frame.group,
        frame.degenerate,
        frame.len()
    )
    .unwrap();
    let t = frame.centroid();
    writeln!(s, "translation {} {} {}", fmt_f64(t.x), fmt_f64(t.y), fmt_f64(t.z)).unwrap();
    let ev: Vec<String> = frame.eigenvalues.iter().copied().map(fmt_f64).collect();
    writeln!(s, "eigenvalues {}", ev.join(" ")).unwrap();
    for (k, g) in frame.elements.iter().enumerate() {
        let r = g.rotation();
        let entries: Vec<String> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| fmt_f64(r[(i, j)]))
            .collect();
        writeln!(s, "rotation {k} {}", entries.join(" ")).unwrap();
    }
    s
}

/// Inverse of [`frame_to_text`].
pub fn frame_from_text(text: &str) -> Result<Frame> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty frame text"))?;
    let mut group = None;
    let mut degenerate = None;
    let mut count = None;
    for tok in header.split_whitespace().skip(1) {
        match tok.split_once('=') {
            Some(("group", v)) => group = Some(v.parse::<FrameGroup>()?),
            Some(("degenerate", v)) => degenerate = v.parse::<bool>().ok(),
            Some(("elements", v)) => count = v.parse::<usize>().ok(),
            _ => return Err(Error::parse(ln, format!("unexpected token '{tok}'"))),
        }
    }
    let (group, degenerate, count) = match (group, degenerate, count) {
        (Some(g), Some(d), Some(c)) if header.starts_with("frame ") => (g, d, c),
        _ => return Err(Error::parse(ln, "malformed frame header")),
    };
    let numbers = |ln: usize, line: &str, tag: &str, skip: usize| -> Result<Vec<f64>> {
        let mut it = line.split_whitespace();
        if it.next() != Some(tag) {
            return Err(Error::parse(ln, format!("expected '{tag}' line")));
        }
        it.skip(skip)
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number '{v}'"))))
            .collect()
    };
    let (ln, line) = lines.next().ok_or_else(|| Error::parse(2, "missing translation"))?;
    let t = numbers(ln, line, "translation", 0)?;
    if t.len() != 3 {
        return Err(Error::parse(ln, "translation needs 3 numbers"));
    }
    let t = Vector3::new(t[0], t[1], t[2]);
    let (ln, line) = lines.next().ok_or_else(|| Error::parse(3, "missing eigenvalues"))?;
    let eigenvalues = numbers(ln, line, "eigenvalues", 0)?;
    let mut elements = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(4 + elements.len(), "missing rotation line"))?;
        let r = numbers(ln, line, "rotation", 1)?;
        if r.len() != 9 {
            return Err(Error::parse(ln, "rotation needs 9 numbers"));
        }
        let g = EuclideanTransform::new(Matrix3::from_row_slice(&r), t)
            .map_err(|e| Error::parse(ln, e.to_string()))?;
        elements.push(g);
    }
    Ok(Frame {
        elements,
        eigenvalues,
        group,
        degenerate,
    })
}
