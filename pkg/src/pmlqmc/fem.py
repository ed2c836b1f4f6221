"""p-refined Lagrange triangles for plane-strain linear elasticity.

Every element of a level shares one quadrature rule and one order ``p``.
The random field enters through its values at the element's integration
points: each value scales Young's modulus in that point's contribution to
the element stiffness,

    K_e = sum_i  c_i * w_i * |J_e| * B_i^T D B_i .

Degrees of freedom are interleaved per node: ``(u_x, u_y)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.special import eval_jacobi

from .errors import InputError, MeshError, NumericalError, ParseError
from .point_selection import element_vertices

# -- mesh ---------------------------------------------------------------------


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray  # (n, 2) metres
    triangles: np.ndarray  # (m, 3), counterclockwise
    fixed_node_ids: tuple
    qoi_node_id: int

    def __post_init__(self):
        n = len(self.nodes)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3 or len(self.triangles) == 0:
            raise MeshError("mesh needs at least one triangle with three vertex indices")
        if self.triangles.min() < 0 or self.triangles.max() >= n:
            raise MeshError("triangle vertex index out of range")
        for e, t in enumerate(self.triangles):
            if len(set(t.tolist())) < 3:
                raise MeshError(f"element {e} repeats a vertex index")
        if not self.fixed_node_ids:
            raise MeshError("at least one fixed node is required")
        if any(not 0 <= i < n for i in self.fixed_node_ids):
            raise MeshError("fixed node id out of range")
        if not 0 <= self.qoi_node_id < n or self.qoi_node_id in self.fixed_node_ids:
            raise MeshError("QoI node must be a free node of the mesh")
        element_vertices(self)

    @property
    def n_elements(self):
        return len(self.triangles)

    def areas(self):
        V = element_vertices(self)
        e1, e2 = V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def translated(self, offset):
        return Mesh(self.nodes + np.asarray(offset, float), self.triangles, self.fixed_node_ids, self.qoi_node_id)


def make_mesh(nodes, triangles, fixed_node_ids, qoi_node_id) -> Mesh:
    """Build a mesh, flipping clockwise triangles and rejecting degenerate ones."""
    nodes = np.array(nodes, dtype=float)
    tris = np.array(triangles, dtype=np.intp).reshape(-1, 3)
    if len(nodes) == 0 or not np.all(np.isfinite(nodes)):
        raise MeshError("mesh nodes must be finite")
    if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
        raise MeshError("triangle vertex index out of range")
    for e, t in enumerate(tris):
        if len(set(t.tolist())) < 3:
            raise MeshError(f"element {e} repeats a vertex index")
        p0, p1, p2 = nodes[t]
        a2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
        if a2 == 0:
            raise MeshError(f"element {e} has zero area")
        if a2 < 0:
            tris[e] = t[[0, 2, 1]]
    nodes.setflags(write=False)
    tris.setflags(write=False)
    return Mesh(nodes, tris, tuple(int(i) for i in fixed_node_ids), int(qoi_node_id))


def load_mesh(path) -> Mesh:
    """Parse the ASCII mesh format.

    Line 1 ``nnodes ntris nfixed``, then ``x y`` per node, ``i j k`` per
    triangle (0-based), one fixed node id per line, and the QoI node id.
    """
    with open(path) as fh:
        lines = [(k, ln.split()) for k, ln in enumerate(fh, start=1) if ln.strip()]
    it = iter(lines)

    def take(count, what):
        lineno, parts = next(it, (None, None))
        if parts is None:
            raise ParseError(f"unexpected end of file while reading {what}", path)
        if len(parts) != count:
            raise ParseError(f"expected {count} values for {what}, got {len(parts)}", path, lineno)
        return lineno, parts

    lineno, head = take(3, "header")
    try:
        nn, nt, nf = (int(x) for x in head)
        nodes = []
        for _ in range(nn):
            lineno, parts = take(2, "node")
            nodes.append([float(x) for x in parts])
        tris = []
        for _ in range(nt):
            lineno, parts = take(3, "triangle")
            tris.append([int(x) for x in parts])
        fixed = []
        for _ in range(nf):
            lineno, parts = take(1, "fixed node")
            fixed.append(int(parts[0]))
        lineno, parts = take(1, "QoI node")
        qoi = int(parts[0])
    except ValueError as exc:
        raise ParseError(str(exc), path, lineno) from None
    extra = next(it, None)
    if extra is not None:
        raise ParseError("trailing content after QoI node id", path, extra[0])
    return make_mesh(nodes, tris, fixed, qoi)


def slope_mesh() -> Mesh:
    """The bundled 33-triangle slope (20 m x 14 m, bottom edge clamped).

    The QoI node is the top of the slope crest at (15, 14).
    """
    with resources.as_file(resources.files("pmlqmc.data").joinpath("slope.mesh")) as p:
        return load_mesh(p)


# -- Lagrange basis -----------------------------------------------------------


def lattice_nodes(p: int) -> np.ndarray:
    """Uniform nodes (i/p, j/p), i + j <= p, in lexicographic (j, i) order."""
    return np.array([(i / p, j / p) for j in range(p + 1) for i in range(p + 1 - j)], dtype=float)


def _jacobi_grad(n, a, b, x):
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + a + b + 1) * eval_jacobi(n - 1, a + 1, b + 1, x)


def _dubiner(p, uv):
    """Orthogonal basis on the triangle and its (u, v) gradients at `uv`."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    r = 2.0 * uv[:, 0] - 1.0
    s = 2.0 * uv[:, 1] - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(np.isclose(s, 1.0), -1.0, 2.0 * (1.0 + r) / (1.0 - s) - 1.0)
    b = s
    half = 0.5 * (1.0 - b)
    n = (p + 1) * (p + 2) // 2
    P = np.empty((len(uv), n))
    dr = np.empty((len(uv), n))
    ds = np.empty((len(uv), n))
    k = 0
    for i in range(p + 1):
        for j in range(p + 1 - i):
            fa = eval_jacobi(i, 0, 0, a)
            dfa = _jacobi_grad(i, 0, 0, a)
            gb = eval_jacobi(j, 2 * i + 1, 0, b)
            dgb = _jacobi_grad(j, 2 * i + 1, 0, b)
            P[:, k] = fa * gb * half**i
            dmr = dfa * gb
            dms = dfa * gb * 0.5 * (1.0 + a)
            if i > 0:
                dmr = dmr * half ** (i - 1)
                dms = dms * half ** (i - 1)
            tmp = dgb * half**i
            if i > 0:
                tmp = tmp - 0.5 * i * gb * half ** (i - 1)
            dms = dms + fa * tmp
            dr[:, k] = dmr
            ds[:, k] = dms
            k += 1
    # d/du = 2 d/dr, d/dv = 2 d/ds
    return P, 2.0 * dr, 2.0 * ds


@dataclass(frozen=True)
class ElementBasis:
    order: int
    nodes_local: np.ndarray  # (n_nodes, 2)
    points: np.ndarray  # (nq, 2) where the basis is tabulated
    N: np.ndarray  # (nq, n_nodes)
    dN: np.ndarray  # (nq, n_nodes, 2): d/du, d/dv

    @property
    def n_nodes(self):
        return len(self.nodes_local)


_COND_LIMIT = 1e12


def _nodal_transform(p):
    nodes = lattice_nodes(p)
    V, _, _ = _dubiner(p, nodes)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise NumericalError(f"nodal basis of order {p} is ill-conditioned (cond={cond:.3g})")
    return nodes, np.linalg.inv(V)


def lagrange_values(order: int, uv):
    """Nodal basis values and gradients at arbitrary reference points."""
    nodes, Vinv = _nodal_transform(order)
    P, Pu, Pv = _dubiner(order, uv)
    return P @ Vinv, np.stack([Pu @ Vinv, Pv @ Vinv], axis=-1)


def tabulate_basis(order: int, rule) -> ElementBasis:
    """Tabulate the order-`order` nodal basis at the points of `rule`."""
    if not 1 <= order <= 8:
        raise InputError(f"element order must be in [1, 8], got {order}")
    pts = np.asarray(getattr(rule, "points", rule), dtype=float)
    N, dN = lagrange_values(order, pts)
    for arr in (N, dN, pts):
        arr.setflags(write=False)
    nodes = lattice_nodes(order)
    nodes.setflags(write=False)
    return ElementBasis(order, nodes, pts, N, dN)


# -- degrees of freedom -------------------------------------------------------


@dataclass(frozen=True)
class DofMap:
    """Global node numbering for order-p elements on a mesh."""

    order: int
    element_nodes: np.ndarray  # (m, n_local) global node ids
    node_coords: np.ndarray  # (n_global, 2)
    fixed_nodes: np.ndarray
    qoi_node: int

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_dofs(self):
        return 2 * self.n_nodes

    @property
    def fixed_dofs(self):
        return np.sort(np.concatenate([2 * self.fixed_nodes, 2 * self.fixed_nodes + 1]))

    @property
    def qoi_dof(self):
        return 2 * self.qoi_node + 1


def build_dofmap(mesh: Mesh, order: int) -> DofMap:
    """Number vertex, edge and interior nodes.

    Edge nodes are shared through the sorted vertex pair of the edge.  An
    edge node is clamped when its edge lies on the boundary and both of its
    end vertices are clamped.
    """
    p = order
    tris = mesh.triangles
    nv = len(mesh.nodes)
    local = [(i, j) for j in range(p + 1) for i in range(p + 1 - j)]

    edge_count = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    edges = sorted(edge_count)
    edge_id = {k: n for n, k in enumerate(edges)}
    n_edge_nodes = p - 1
    n_int = (p - 1) * (p - 2) // 2
    base_edge = nv
    base_int = nv + len(edges) * n_edge_nodes

    elem_nodes = np.empty((len(tris), len(local)), dtype=np.intp)
    for e, t in enumerate(tris):
        int_counter = 0
        for k, (i, j) in enumerate(local):
            if (i, j) == (0, 0):
                g = t[0]
            elif (i, j) == (p, 0):
                g = t[1]
            elif (i, j) == (0, p):
                g = t[2]
            elif j == 0:
                g = _edge_node(edge_id, base_edge, n_edge_nodes, t[0], t[1], i, p)
            elif i + j == p:
                g = _edge_node(edge_id, base_edge, n_edge_nodes, t[1], t[2], j, p)
            elif i == 0:
                g = _edge_node(edge_id, base_edge, n_edge_nodes, t[2], t[0], p - j, p)
            else:
                g = base_int + e * n_int + int_counter
                int_counter += 1
            elem_nodes[e, k] = g
    n_global = base_int + len(tris) * n_int

    V = element_vertices(mesh)
    lat = lattice_nodes(p)
    coords = np.empty((n_global, 2))
    for e in range(len(tris)):
        X = V[e, 0] + lat[:, :1] * (V[e, 1] - V[e, 0]) + lat[:, 1:] * (V[e, 2] - V[e, 0])
        coords[elem_nodes[e]] = X

    fixed_v = set(mesh.fixed_node_ids)
    fixed = set(fixed_v)
    for (a, b), cnt in edge_count.items():
        if cnt == 1 and a in fixed_v and b in fixed_v:
            start = base_edge + edge_id[(a, b)] * n_edge_nodes
            fixed.update(range(start, start + n_edge_nodes))
    for arr in (elem_nodes, coords):
        arr.setflags(write=False)
    return DofMap(p, elem_nodes, coords, np.array(sorted(fixed), dtype=np.intp), mesh.qoi_node_id)


def _edge_node(edge_id, base, per_edge, va, vb, t, p):
    """Global id of the node at step t (1..p-1) from va towards vb."""
    key = (min(va, vb), max(va, vb))
    k = t if va == key[0] else p - t
    return base + edge_id[key] * per_edge + (k - 1)


# -- material and assembly ----------------------------------------------------


@dataclass(frozen=True)
class Material:
    young: float = 30e6
    poisson: float = 0.25
    density: float = 1330.0
    gravity: float = 9.81
    field_role: str = "scale_young"
    field_reference: float = 1.0  # field values are divided by this before scaling E

    def __post_init__(self):
        if not self.young > 0:
            raise InputError("Young's modulus must be positive")
        if not -1.0 < self.poisson < 0.5:
            raise InputError("Poisson ratio must lie in (-1, 0.5)")
        if self.density < 0:
            raise InputError("density must be non-negative")
        if self.field_role != "scale_young":
            raise InputError(f"unsupported field role {self.field_role!r}")
        if not self.field_reference > 0:
            raise InputError("field reference value must be positive")

    def plane_strain_matrix(self, young=None):
        E = self.young if young is None else young
        nu = self.poisson
        c = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        return c * np.array([[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 * (1.0 - 2.0 * nu)]])


@dataclass
class ElasticModel:
    """Field-independent data of one (mesh, order, rule) discretisation.

    Build with :func:`build_model`; :meth:`stiffness` then assembles K for
    any vector of integration-point field values and :meth:`solve` runs the
    reduced solve on a sparsity pattern ordered once at build time.
    """

    mesh: Mesh
    basis: ElementBasis
    weights: np.ndarray
    material: Material
    dofmap: DofMap
    B: np.ndarray = field(repr=False)  # (m, nq, 3, nd)
    DBw: np.ndarray = field(repr=False)  # (m, nq, 3, nd), D0 B w |J|
    load: np.ndarray = field(repr=False)  # (n_dofs,)
    _pattern: tuple = field(repr=False)
    _free: np.ndarray = field(repr=False)
    _reduced: "_ReducedPattern" = field(default=None, repr=False)

    @property
    def n_points(self):
        return self.B.shape[0] * self.B.shape[1]

    @property
    def n_dofs(self):
        return self.dofmap.n_dofs

    @property
    def free_dofs(self):
        return self._free

    def scatter(self, Ke) -> scipy.sparse.csr_matrix:
        """Assemble element matrices (m, nd, nd) into the full sparse K."""
        pos, shape, indptr, indices = self._pattern
        data = np.bincount(pos, weights=Ke.ravel(), minlength=len(indices))
        return scipy.sparse.csr_matrix((data, indices, indptr), shape=shape)

    def element_stiffness(self, field_values) -> np.ndarray:
        c = self._field_scale(field_values)
        m, nq, _, nd = self.B.shape
        Bs = self.B.reshape(m, nq * 3, nd)
        DB = (self.DBw * c[:, :, None, None]).reshape(m, nq * 3, nd)
        Ke = np.matmul(Bs.transpose(0, 2, 1), DB)
        return 0.5 * (Ke + Ke.transpose(0, 2, 1))

    def stiffness(self, field_values=None) -> scipy.sparse.csr_matrix:
        return self.scatter(self.element_stiffness(field_values))

    def _field_scale(self, field_values):
        m, nq = self.B.shape[:2]
        if field_values is None:
            return np.ones((m, nq))
        vals = np.asarray(getattr(field_values, "values", field_values), dtype=float)
        if vals.size != m * nq:
            raise InputError(f"field has {vals.size} values, model needs {m * nq} (elements x points)")
        c = vals.reshape(m, nq) / self.material.field_reference
        bad = np.argwhere(~(c > 0) | ~np.isfinite(c))
        if len(bad):
            e, i = bad[0]
            raise InputError(f"non-positive or non-finite field value at element {e}, point {i}")
        return c

    def solve(self, field_values=None) -> "Solution":
        uf = self._reduced.solve(self.element_stiffness(field_values))
        u = np.zeros(self.n_dofs)
        u[self._free] = uf
        return Solution(u, float(u[self.dofmap.qoi_dof]))

    def qoi(self, field_values=None) -> float:
        uf = self._reduced.solve(self.element_stiffness(field_values))
        return float(uf[self._reduced.qoi_pos])

    @property
    def nnz(self) -> int:
        return int(len(self._pattern[3]))

    def solve_cost_units(self) -> int:
        """Deterministic cost of one assemble-and-solve, ``nnz(K)^1.5``.

        This is the usual work estimate of a sparse direct factorisation of a
        2-D finite element matrix; it tracks measured solve times far better
        than ``nnz`` alone when set against the ``n^3`` eigensolver charge.
        """
        return int(round(self.nnz**1.5))


class _ReducedPattern:
    """CSC pattern of K restricted to free dofs, in a fill-reducing order.

    The ordering comes from one minimum-degree factorisation of the
    constant-field matrix; per-sample factorisations then skip reordering
    and pivoting, which also makes a non-positive pivot a definiteness test.
    """

    def __init__(self, elem_dofs, free, n_dofs, load, qoi_dof, Ke_ref):
        nd = elem_dofs.shape[1]
        rmap = np.full(n_dofs, -1, dtype=np.intp)
        rmap[free] = np.arange(len(free))
        rows = np.repeat(rmap[elem_dofs], nd, axis=1).ravel()
        cols = np.tile(rmap[elem_dofs], (1, nd)).ravel()
        self.mask = (rows >= 0) & (cols >= 0)
        rows, cols = rows[self.mask], cols[self.mask]
        n = len(free)
        A = scipy.sparse.csc_matrix((Ke_ref.ravel()[self.mask], (rows, cols)), shape=(n, n))
        perm = scipy.sparse.linalg.splu(A, permc_spec="MMD_AT_PLUS_A").perm_c
        inv = np.empty(n, dtype=np.intp)
        inv[perm] = np.arange(n)
        prow, pcol = inv[rows], inv[cols]
        key = pcol * n + prow
        uniq, pos = np.unique(key, return_inverse=True)
        self.pos = pos.ravel()
        self.indices = (uniq % n).astype(np.intp)
        counts = np.bincount(uniq // n, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
        self.n = n
        self.perm = perm
        self.inv = inv
        self.rhs = load[free][perm]
        self.qoi_pos = int(rmap[qoi_dof])
        self._order = inv  # reduced index -> permuted position

    def matrix(self, Ke):
        data = np.bincount(self.pos, weights=Ke.ravel()[self.mask], minlength=len(self.indices))
        return scipy.sparse.csc_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def solve(self, Ke):
        """Displacements of the free dofs in the permuted order."""
        A = self.matrix(Ke)
        if not np.any(self.rhs):
            return np.zeros(self.n)[self._order]
        x = _spd_solve(A, self.rhs)
        return x[self._order]


def _spd_solve(A, b):
    try:
        lu = scipy.sparse.linalg.splu(
            A, permc_spec="NATURAL", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True)
        )
    except RuntimeError as exc:
        raise NumericalError(f"reduced stiffness is singular ({exc}); check boundary-condition coverage") from exc
    piv = lu.U.diagonal()
    if np.any(lu.perm_r != np.arange(A.shape[0])) or not np.all(piv > 0):
        raise NumericalError("reduced stiffness is not positive definite; check boundary-condition coverage")
    x = lu.solve(b)
    res = np.linalg.norm(A @ x - b)
    if not np.all(np.isfinite(x)) or res > 1e-9 * np.linalg.norm(b):
        raise NumericalError(f"reduced solve residual {res:.3g} exceeds tolerance")
    return x


def _strain_matrices(mesh, basis):
    V = element_vertices(mesh)
    J = np.stack([V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]], axis=-1)  # columns d/du, d/dv
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0):
        e = int(np.flatnonzero(det <= 0)[0])
        raise MeshError(f"element {e} has a singular or inverted Jacobian")
    Jinv = np.linalg.inv(J)  # (m, 2, 2)
    # grad_x N = J^{-T} grad_u N
    G = np.einsum("qnk,ekj->eqnj", basis.dN, Jinv)  # (m, nq, n_nodes, 2)
    m, nq, nn, _ = G.shape
    B = np.zeros((m, nq, 3, 2 * nn))
    B[:, :, 0, 0::2] = G[..., 0]
    B[:, :, 1, 1::2] = G[..., 1]
    B[:, :, 2, 0::2] = G[..., 1]
    B[:, :, 2, 1::2] = G[..., 0]
    return B, det


def _sparsity(elem_dofs, n_dofs):
    m, nd = elem_dofs.shape
    rows = np.repeat(elem_dofs, nd, axis=1).ravel()
    cols = np.tile(elem_dofs, (1, nd)).ravel()
    key = rows * n_dofs + cols
    uniq, pos = np.unique(key, return_inverse=True)
    urows = uniq // n_dofs
    ucols = uniq % n_dofs
    indptr = np.zeros(n_dofs + 1, dtype=np.intp)
    np.add.at(indptr, urows + 1, 1)
    indptr = np.cumsum(indptr)
    return pos.ravel(), (n_dofs, n_dofs), indptr, ucols.astype(np.intp)


def build_model(mesh: Mesh, order: int, rule, material: Material) -> ElasticModel:
    basis = tabulate_basis(order, rule)
    weights = np.asarray(rule.weights, dtype=float)
    dm = build_dofmap(mesh, order)
    B, det = _strain_matrices(mesh, basis)
    D0 = material.plane_strain_matrix()
    DBw = np.einsum("ab,eqbk->eqak", D0, B) * (weights[None, :] * det[:, None])[:, :, None, None]
    elem_dofs = np.empty((mesh.n_elements, 2 * basis.n_nodes), dtype=np.intp)
    elem_dofs[:, 0::2] = 2 * dm.element_nodes
    elem_dofs[:, 1::2] = 2 * dm.element_nodes + 1
    load = assemble_body_force(mesh, basis, rule, material, dm)
    free = np.setdiff1d(np.arange(dm.n_dofs), dm.fixed_dofs)
    model = ElasticModel(mesh, basis, weights, material, dm, B, DBw, load, _sparsity(elem_dofs, dm.n_dofs), free)
    model._reduced = _ReducedPattern(elem_dofs, free, dm.n_dofs, load, dm.qoi_dof, model.element_stiffness(None))
    return model


def assemble_stiffness(mesh, basis_or_order, rule, material, field_values=None):
    """Global K for the given integration-point field (element-major values)."""
    order = getattr(basis_or_order, "order", basis_or_order)
    return build_model(mesh, order, rule, material).stiffness(field_values)


def assemble_body_force(mesh, basis, rule, material, dofmap=None) -> np.ndarray:
    """Self-weight load: f_y of node a is -rho g times the integral of N_a."""
    if dofmap is None:
        dofmap = build_dofmap(mesh, basis.order)
    V = element_vertices(mesh)
    e1, e2 = V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    w = np.asarray(rule.weights, dtype=float)
    integ = np.einsum("q,qn->n", w, basis.N)  # reference-element integral of each N_a
    f = np.zeros(dofmap.n_dofs)
    contrib = -material.density * material.gravity * det[:, None] * integ[None, :]
    np.add.at(f, 2 * dofmap.element_nodes + 1, contrib)
    return f


# -- solve --------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    displacement: np.ndarray  # (2 n_nodes,), interleaved x/y
    qoi: float

    def node_table(self):
        d = self.displacement.reshape(-1, 2)
        return [(i, ux, uy) for i, (ux, uy) in enumerate(d)]


def solve(K, f, fixed_dofs, qoi_dof) -> Solution:
    """Eliminate clamped dofs and solve the reduced symmetric system directly."""
    K = scipy.sparse.csr_matrix(K)
    f = np.asarray(f, dtype=float)
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), np.asarray(fixed_dofs, dtype=np.intp))
    u = np.zeros(n)
    ff = f[free]
    if np.any(ff):
        Kff = K[free][:, free]
        perm = reverse_cuthill_mckee(Kff.tocsr(), symmetric_mode=True)
        x = _spd_solve(Kff[perm][:, perm].tocsc(), ff[perm])
        u[free[perm]] = x
    return Solution(u, float(u[qoi_dof]))


def dump_solution_csv(solution: Solution, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "ux", "uy"])
        for i, ux, uy in solution.node_table():
            w.writerow([i, f"{ux:.17g}", f"{uy:.17g}"])
