//! Deformation energy minimization by alternating closest-point matching and
//! sparse least-squares offset solves.

use nalgebra::Matrix3;

use crate::geometry::{aabb, compute_obb, knn_graph, KdTree, NeighborGraph, Vec3};

use super::{
    conjugate_gradient, AffineTransform, Correspondence, CorrespondenceSet, DeformationField, EnergyReport,
    LabeledPointSet, RegistrationError, RegistrationParams, SparseMatrix,
};

/// Maps part A's oriented box onto part B's: per-axis extent scaling between
/// principal frames (axes paired by descending variance).
pub fn affine_init(part_a: &[Vec3], part_b: &[Vec3]) -> Result<AffineTransform, RegistrationError> {
    if part_a.is_empty() || part_b.is_empty() {
        return Err(RegistrationError::EmptyPart);
    }
    let oa = compute_obb(part_a)?;
    let ob = compute_obb(part_b)?;
    let scale = Matrix3::from_fn(|r, c| {
        if r != c {
            0.0
        } else if oa.half_extents[r] < 1e-8 {
            1.0
        } else {
            ob.half_extents[r] / oa.half_extents[r]
        }
    });
    let linear = ob.frame() * scale * oa.frame().transpose();
    Ok(AffineTransform { linear, translation: ob.center - linear * oa.center })
}

/// `I + weight·L` where `L` is the Laplacian of the directed neighbor edges,
/// i.e. the Hessian (halved) of `Σ|o|² + weight·Σ_{(a,a')} |o(a) − o(a')|²`.
pub fn smoothness_matrix(graph: &NeighborGraph, weight: f64) -> SparseMatrix {
    let n = graph.len();
    let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for (i, j) in graph.edges() {
        t.extend([(i, i, weight), (j, j, weight), (i, j, -weight), (j, i, -weight)]);
    }
    SparseMatrix::from_triplets(n, t)
}

fn neighbor_graph(points: &[Vec3], k: usize) -> Result<NeighborGraph, RegistrationError> {
    let k = k.min(points.len().saturating_sub(1));
    if k == 0 {
        return Ok(NeighborGraph { k: 0, neighbors: vec![Vec::new(); points.len()] });
    }
    Ok(knn_graph(points, k)?)
}

fn data_term(points: &[Vec3], offsets: &[Vec3], other: &[Vec3], matches: &[usize]) -> f64 {
    points
        .iter()
        .zip(offsets)
        .zip(matches)
        .map(|((p, o), &m)| (p + o - other[m]).norm_squared())
        .sum()
}

fn smooth_term(graph: &NeighborGraph, offsets: &[Vec3], weight: f64) -> f64 {
    weight * graph.edges().map(|(i, j)| (offsets[i] - offsets[j]).norm_squared()).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn energy(
    iteration: usize,
    a: &[Vec3],
    b: &[Vec3],
    oa: &[Vec3],
    ob: &[Vec3],
    m_ab: &[usize],
    m_ba: &[usize],
    ga: &NeighborGraph,
    gb: &NeighborGraph,
    weight: f64,
) -> EnergyReport {
    let data_ab = data_term(a, oa, b, m_ab);
    let data_ba = data_term(b, ob, a, m_ba);
    let smooth_a = smooth_term(ga, oa, weight);
    let smooth_b = smooth_term(gb, ob, weight);
    EnergyReport { iteration, data_ab, data_ba, smooth_a, smooth_b, total: data_ab + data_ba + smooth_a + smooth_b }
}

/// Minimizes one side's quadratic: `(I + λL) o = m − p`, per axis, warm-started.
fn solve_side(
    matrix: &SparseMatrix,
    points: &[Vec3],
    other: &[Vec3],
    matches: &[usize],
    offsets: &mut [Vec3],
    params: &RegistrationParams,
) -> Result<(), RegistrationError> {
    let n = points.len();
    let mut rhs = vec![0.0; n];
    let mut x = vec![0.0; n];
    for axis in 0..3 {
        for i in 0..n {
            rhs[i] = other[matches[i]][axis] - points[i][axis];
            x[i] = offsets[i][axis];
        }
        conjugate_gradient(matrix, &rhs, &mut x, params.cg_tol, params.cg_max_iters);
        for i in 0..n {
            offsets[i][axis] = x[i];
        }
    }
    if offsets.iter().any(|o| !o.iter().all(|c| c.is_finite())) {
        return Err(RegistrationError::NonFinite("offsets"));
    }
    Ok(())
}

/// Offsets minimizing the deformation energy with the matches held fixed.
///
/// `matches_ab[i]` is the point of B paired with `part_a[i]` and vice versa.
#[allow(clippy::too_many_arguments)]
pub fn solve_offsets(
    part_a: &[Vec3],
    part_b: &[Vec3],
    matches_ab: &[usize],
    matches_ba: &[usize],
    graph_a: &NeighborGraph,
    graph_b: &NeighborGraph,
    params: &RegistrationParams,
) -> Result<(DeformationField, DeformationField, EnergyReport), RegistrationError> {
    let mut oa = vec![Vec3::zeros(); part_a.len()];
    let mut ob = vec![Vec3::zeros(); part_b.len()];
    solve_side(&smoothness_matrix(graph_a, params.smoothness), part_a, part_b, matches_ab, &mut oa, params)?;
    solve_side(&smoothness_matrix(graph_b, params.smoothness), part_b, part_a, matches_ba, &mut ob, params)?;
    let report = energy(0, part_a, part_b, &oa, &ob, matches_ab, matches_ba, graph_a, graph_b, params.smoothness);
    Ok((DeformationField { offsets: oa }, DeformationField { offsets: ob }, report))
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub field_a: DeformationField,
    pub field_b: DeformationField,
    /// Closest point of B for every deformed point of A.
    pub matches_ab: Vec<usize>,
    pub matches_ba: Vec<usize>,
    /// Energy before the first solve, then after every iteration.
    pub reports: Vec<EnergyReport>,
    pub converged: bool,
}

fn closest_all(tree: &KdTree<'_>, points: &[Vec3], offsets: &[Vec3]) -> Vec<usize> {
    points
        .iter()
        .zip(offsets)
        .map(|(p, o)| tree.closest(&(p + o)).expect("non-empty part"))
        .collect()
}

struct Part<'a> {
    points: &'a [Vec3],
    graph: NeighborGraph,
    tree: KdTree<'a>,
}

/// One alternating minimization of the energy at smoothness `weight`,
/// starting from the given offsets.
fn icp_stage(
    a: &Part<'_>,
    b: &Part<'_>,
    weight: f64,
    params: &RegistrationParams,
    mut oa: Vec<Vec3>,
    mut ob: Vec<Vec3>,
) -> Result<IcpResult, RegistrationError> {
    let ma = smoothness_matrix(&a.graph, weight);
    let mb = smoothness_matrix(&b.graph, weight);
    let mut m_ab = closest_all(&b.tree, a.points, &oa);
    let mut m_ba = closest_all(&a.tree, b.points, &ob);
    let report = |it: usize, oa: &[Vec3], ob: &[Vec3], m_ab: &[usize], m_ba: &[usize]| {
        energy(it, a.points, b.points, oa, ob, m_ab, m_ba, &a.graph, &b.graph, weight)
    };
    let first = report(0, &oa, &ob, &m_ab, &m_ba);
    let mut reports = vec![first];
    let mut converged = first.total == 0.0;
    for it in 1..=params.max_iters {
        if converged {
            break;
        }
        solve_side(&ma, a.points, b.points, &m_ab, &mut oa, params)?;
        solve_side(&mb, b.points, a.points, &m_ba, &mut ob, params)?;
        m_ab = closest_all(&b.tree, a.points, &oa);
        m_ba = closest_all(&a.tree, b.points, &ob);
        let e = report(it, &oa, &ob, &m_ab, &m_ba);
        let prev = reports.last().expect("initial report").total;
        reports.push(e);
        converged = prev - e.total < params.rel_tol * first.total;
    }
    Ok(IcpResult {
        field_a: DeformationField { offsets: oa },
        field_b: DeformationField { offsets: ob },
        matches_ab: m_ab,
        matches_ba: m_ba,
        reports,
        converged,
    })
}

/// Alternates offset solves and closest-point updates.
///
/// The offsets are first warmed up by stiffer stages (smoothness multiplied
/// by each entry of `params.warmup`); the returned reports cover only the
/// final stage at `params.smoothness`. Within that stage every step
/// minimizes the same energy over one block of variables, so the reported
/// energies never increase.
pub fn icp_register(
    part_a: &[Vec3],
    part_b: &[Vec3],
    params: &RegistrationParams,
) -> Result<IcpResult, RegistrationError> {
    if part_a.is_empty() || part_b.is_empty() {
        return Err(RegistrationError::EmptyPart);
    }
    if part_a.iter().chain(part_b).any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(RegistrationError::NonFinite("input points"));
    }
    let a = Part { points: part_a, graph: neighbor_graph(part_a, params.neighbors)?, tree: KdTree::new(part_a) };
    let b = Part { points: part_b, graph: neighbor_graph(part_b, params.neighbors)?, tree: KdTree::new(part_b) };
    let mut oa = vec![Vec3::zeros(); part_a.len()];
    let mut ob = vec![Vec3::zeros(); part_b.len()];
    for &mult in &params.warmup {
        let r = icp_stage(&a, &b, params.smoothness * mult, params, oa, ob)?;
        oa = r.field_a.offsets;
        ob = r.field_b.offsets;
    }
    icp_stage(&a, &b, params.smoothness, params, oa, ob)
}

/// Summary of one registered part pair.
#[derive(Debug, Clone)]
pub struct PartReport {
    pub label: u32,
    pub points_a: usize,
    pub points_b: usize,
    pub reports: Vec<EnergyReport>,
    pub converged: bool,
}

/// Registers every same-label part pair and returns A→B correspondences
/// (one per point of A in a shared part).
///
/// Each part pair is first mapped by [`affine_init`], then both parts are
/// translated and scaled so part B fits the unit cube.
pub fn generate_pair_correspondences(
    shape_a: &LabeledPointSet,
    shape_b: &LabeledPointSet,
    params: &RegistrationParams,
) -> Result<(CorrespondenceSet, Vec<PartReport>), RegistrationError> {
    let labels_b = shape_b.label_set();
    let shared: Vec<u32> = shape_a.label_set().into_iter().filter(|l| labels_b.binary_search(l).is_ok()).collect();
    if shared.is_empty() {
        return Err(RegistrationError::NoSharedLabels { a: shape_a.shape_id, b: shape_b.shape_id });
    }
    let mut set = CorrespondenceSet::default();
    let mut parts = Vec::with_capacity(shared.len());
    for label in shared {
        let ia = shape_a.part(label);
        let ib = shape_b.part(label);
        let pa: Vec<Vec3> = ia.iter().map(|&i| shape_a.points[i]).collect();
        let pb: Vec<Vec3> = ib.iter().map(|&i| shape_b.points[i]).collect();
        let t = affine_init(&pa, &pb)?;
        let (lo, hi) = aabb(&pb).expect("non-empty part");
        let ext = (hi - lo).max();
        let s = if ext > 1e-12 { 1.0 / ext } else { 1.0 };
        let pa: Vec<Vec3> = pa.iter().map(|p| (t.apply(p) - lo) * s).collect();
        let pb: Vec<Vec3> = pb.iter().map(|p| (p - lo) * s).collect();
        let r = icp_register(&pa, &pb, params)?;
        set.pairs.extend(r.matches_ab.iter().enumerate().map(|(i, &j)| Correspondence {
            shape_a: shape_a.shape_id,
            index_a: ia[i] as u32,
            shape_b: shape_b.shape_id,
            index_b: ib[j] as u32,
        }));
        parts.push(PartReport { label, points_a: pa.len(), points_b: pb.len(), reports: r.reports, converged: r.converged });
    }
    Ok((set, parts))
}
