"""Worldsheet geometry of an embedded surface.

From a discretized embedding X^mu(tau, sigma) this module builds every
geometric object the rest of the package consumes: tangent frames, induced
metric, worldsheet Christoffel/Riemann/Ricci/Einstein tensors, an
orthonormal normal frame, extrinsic curvature, and the normal-bundle
connection, plus the covariant derivative machinery on top of them.

Two conventions that everything downstream relies on:

* Extrinsic curvature sign: K_ab^i = -n^i . (d_a d_b X + Gamma(bg) e_a e_b).
  With this sign the first variation of the induced metric is
  2 K_ab^i phi_i + grad terms, which the finite-difference oracles in
  :mod:`stringlab.deformation` verify directly.  A closed string of
  outward normal n then has K_sigma_sigma = +1.

* Worldsheet Riemann: R^a_{bcd} is defined so the commutator on vectors is
  [nabla_c, nabla_d] V^a = R^a_{bcd} V^b, Ricci is R_bd = R^a_{bad}, and the
  flat-background Gauss relation reads R = K^i K_i - K_ab^i K^{ab}_i.

Curvature is assembled in determinant-weighted form: the Christoffel
numerator P^a_{bc} = Gamma^a_{bc} * (-det gamma) is a polynomial in smooth
fields, so every grid derivative in the curvature chain acts on smooth data
and the (singular) division by the determinant happens pointwise.  On
worldsheets with degenerate points (string folds) this keeps the curvature
accurate on active points instead of letting pole values poison the
spectral stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .background import BackgroundSpacetime
from .grid import (
    NORMAL,
    SPACETIME,
    WORLDSHEET_LOWER,
    WORLDSHEET_UPPER,
    Field,
    GridError,
    Mask,
    WorldsheetGrid,
    d_sigma,
    d_tau,
    masked_max_abs,
)

DEGENERACY_TOL = 1e-10
SEED_SKIP_TOL = 1e-8


class GeometryError(ValueError):
    """Geometry construction failure, annotated with the offending point."""

    @classmethod
    def at_point(cls, message: str, it: int, isig: int) -> "GeometryError":
        return cls(f"{message} at grid point (tau_index={it}, sigma_index={isig})")


@dataclass(frozen=True)
class Embedding:
    """Map X^mu(tau, sigma) into a background, with a declared active mask."""

    background: BackgroundSpacetime
    x: Field
    mask: Mask | None = None

    def __post_init__(self):
        if self.x.indices != (SPACETIME,):
            raise GridError(f"embedding chart must carry a single spacetime index, got {self.x.indices}")
        if self.x.values.shape[-1] != self.background.dim:
            raise GridError(
                f"chart dimension {self.x.values.shape[-1]} does not match background dim {self.background.dim}"
            )
        if self.mask is None:
            object.__setattr__(self, "mask", Mask.full(self.x.grid))

    @property
    def grid(self) -> WorldsheetGrid:
        return self.x.grid


@dataclass(frozen=True)
class GeometryBundle:
    """Immutable bundle of every derived geometric field of one embedding."""

    embedding: Embedding
    grid: WorldsheetGrid
    background: BackgroundSpacetime
    mask: Mask                 # declared mask intersected with detected degeneracies
    detected: np.ndarray       # points auto-masked by the degeneracy scan
    g: np.ndarray              # background metric along the embedding (nt, ns, N, N)
    e: Field                   # tangents e_a^mu, indices (a, mu)
    e_low: np.ndarray          # g_{mu nu} e_a^nu
    gamma: Field               # induced metric (a, a)
    gamma_inv: Field           # inverse induced metric (A, A)
    gamma_det: np.ndarray      # det gamma (negative on active points)
    adjugate: np.ndarray       # adj(gamma): gamma . adj = det * Id
    vol: Field                 # sqrt(-det gamma)
    conn: Field                # worldsheet Christoffel Gamma^a_{bc}, indices (A, a, a)
    conn_numerator: np.ndarray # P^a_{bc} = Gamma^a_{bc} * (-det), smooth
    riem: Field                # R^a_{bcd}, indices (A, a, a, a)
    ricci: Field               # (a, a)
    scalar: Field              # scalar curvature
    einstein: Field            # (a, a)
    n: Field                   # orthonormal normal frame n_i^mu, indices (i, mu)
    n_low: np.ndarray
    K: Field                   # extrinsic curvature K_ab^i, indices (a, a, i)
    K_mean: Field              # K^i = gamma^ab K_ab^i
    normal_conn: Field         # omega_a^{ij}, indices (a, i, i), antisymmetric in ij
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def codim(self) -> int:
        return self.background.dim - 2

    def active(self) -> np.ndarray:
        return self.mask.active


# ---------------------------------------------------------------------------
# masked-value hygiene


def fill_masked_along_sigma(values: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Replace values at masked points by linear interpolation between the
    nearest active sigma neighbours in the same row (wrapping).

    Used before feeding fields with masked singular points into the sigma
    spectral stencil, so pole values cannot poison the transform.  Rows with
    no active point are left untouched.
    """
    if active.all():
        return values
    nt, ns = active.shape
    out = values.copy()
    flat = out.reshape(nt, ns, -1)
    for t in range(nt):
        row_act = active[t]
        if row_act.all() or not row_act.any():
            continue
        idx = np.nonzero(row_act)[0]
        for s in np.nonzero(~row_act)[0]:
            right = idx[np.searchsorted(idx, s) % len(idx)]
            left = idx[np.searchsorted(idx, s) - 1]
            span = (right - left) % ns
            wl = ((right - s) % ns) / span if span else 0.5
            flat[t, s] = wl * flat[t, left] + (1.0 - wl) * flat[t, right]
    return out


def _masked_field_derivatives(f: Field, active: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(d_tau, d_sigma) of a field after interpolating over masked points."""
    if active.all():
        return d_tau(f).values, d_sigma(f).values
    filled = Field(f.grid, fill_masked_along_sigma(f.values, active), f.indices)
    return d_tau(filled).values, d_sigma(filled).values


# ---------------------------------------------------------------------------
# normal frame


def _orthonormal_normal_frame(g, e, e_low, gamma_inv, active, tol=SEED_SKIP_TOL):
    """Deterministic normal frame: coordinate-basis seeds in fixed order,
    tangent-span projection, Gram-Schmidt, then an orientation-continuation
    pass so the frame cannot silently flip sign in the middle of the grid.
    """
    nt, ns, dim = e.shape[0], e.shape[1], e.shape[-1]
    k_needed = dim - 2
    normals = np.full((nt, ns, k_needed, dim), np.nan)
    for slot in range(k_needed):
        filled = np.zeros((nt, ns), dtype=bool)
        for s in range(dim):
            todo = ~filled
            if not todo.any():
                break
            v = np.zeros((nt, ns, dim))
            v[..., s] = 1.0
            # remove the tangent span: v -= e_a gamma^{ab} (e_b . v)
            eb_dot_v = e_low[..., :, s]
            v = v - np.einsum("...ab,...b,...am->...m", gamma_inv, eb_dot_v, e)
            # remove previously accepted normals (orthonormal, so no inverse)
            for m in range(slot):
                nm = normals[..., m, :]
                nm_low = np.einsum("...mn,...n->...m", g, nm)
                v = v - nm * np.einsum("...m,...m->...", nm_low, v)[..., None]
            norm2 = np.einsum("...mn,...m,...n->...", g, v, v)
            ok = todo & (norm2 > tol * tol)
            with np.errstate(invalid="ignore"):
                unit = v / np.sqrt(np.maximum(norm2, tol * tol))[..., None]
            normals[ok, slot, :] = unit[ok]
            filled |= ok
        missing = active & ~filled
        if missing.any():
            it, isig = np.argwhere(missing)[0]
            raise GeometryError.at_point(
                "Gram-Schmidt breakdown: every seed is parallel to the tangent span", it, isig
            )
    # second orthogonalization pass: seeds accepted with a small residual
    # norm lose digits to cancellation, one refinement restores them
    for slot in range(k_needed):
        v = normals[..., slot, :]
        eb_dot_v = np.einsum("...am,...m->...a", e_low, v)
        v = v - np.einsum("...ab,...b,...am->...m", gamma_inv, eb_dot_v, e)
        for m in range(slot):
            nm = normals[..., m, :]
            nm_low = np.einsum("...mn,...n->...m", g, nm)
            v = v - nm * np.einsum("...m,...m->...", nm_low, v)[..., None]
        norm2 = np.einsum("...mn,...m,...n->...", g, v, v)
        with np.errstate(invalid="ignore"):
            normals[..., slot, :] = v / np.sqrt(np.abs(norm2))[..., None]
    _orient_frame(normals, active)
    return normals


def _orient_frame(normals: np.ndarray, active: np.ndarray) -> None:
    """Fix the sign of each frame slot by continuation from an anchor point.

    Signs propagate along the anchor column in tau and then along each row
    in sigma (wrapping, skipping masked points), flipping whenever the
    componentwise dot with the running reference turns negative.
    """
    nt, ns, k, _ = normals.shape
    if not active.any():
        return
    t0, s0 = map(int, np.argwhere(active)[0])
    for slot in range(k):
        sl = normals[:, :, slot, :]
        anchor = sl[t0, s0]
        lead = int(np.argmax(np.abs(anchor)))
        if anchor[lead] < 0:
            sl[t0, s0] = -anchor
        # anchor column, downward then upward in tau
        for rows in (range(t0 + 1, nt), range(t0 - 1, -1, -1)):
            ref = sl[t0, s0]
            for t in rows:
                if not active[t, s0]:
                    continue
                if np.dot(ref, sl[t, s0]) < 0:
                    sl[t, s0] = -sl[t, s0]
                ref = sl[t, s0]
        # every row, walking the sigma circle from the anchor column
        ref = sl[:, s0, :].copy()
        for off in range(1, ns):
            s = (s0 + off) % ns
            col = active[:, s]
            if col.any():
                dots = np.einsum("tm,tm->t", ref, sl[:, s, :])
                flip = col & (dots < 0)
                sl[flip, s, :] = -sl[flip, s, :]
                ref[col] = sl[col, s, :]


# ---------------------------------------------------------------------------
# geometry build


def _require_periodic_chart(x: Field, dx_s: Field) -> None:
    """Reject charts that are not genuinely periodic in sigma.

    Sampling a non-periodic map (a straight segment, say) on the circle
    produces wild disagreement between the spectral derivative and a local
    difference quotient; smooth periodic charts agree to O(h^2).
    """
    vals = x.values
    h = x.grid.h_sigma
    local = (np.roll(vals, -1, axis=1) - np.roll(vals, 1, axis=1)) / (2.0 * h)
    scale = 1.0 + np.abs(local).max()
    gap = np.abs(dx_s.values - local).max()
    if gap > 0.5 * scale:
        raise GeometryError(
            "chart is not periodic in sigma (spectral and local derivatives "
            f"disagree by {gap:.2e}); embed the closed string, not a segment"
        )


def build_geometry(emb: Embedding, frame: np.ndarray | None = None) -> GeometryBundle:
    """Compute the full geometry bundle of an embedding.

    ``frame`` optionally overrides the normal frame with given values of
    shape (n_tau, n_sigma, codim, dim); gauge-covariance tests use this to
    rebuild the same geometry in a rotated frame.
    """
    bg = emb.background
    grid = emb.grid
    nt, ns = grid.shape
    dim = bg.dim

    x = emb.x
    dx_t = d_tau(x)
    dx_s = d_sigma(x)
    _require_periodic_chart(x, dx_s)
    e_vals = np.stack([dx_t.values, dx_s.values], axis=2)  # (nt, ns, 2, N)
    g = bg.metric_at(x.values)
    e_low = np.einsum("...mn,...an->...am", g, e_vals)
    gamma = np.einsum("...am,...bm->...ab", e_vals, e_low)
    det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] * gamma[..., 1, 0]

    # degeneracy scan: points where the tangent Gram matrix collapses get a
    # 3x3 rectangle masked around them (folds, collapse instants)
    degenerate = np.abs(det) < DEGENERACY_TOL
    active = emb.mask.active.copy()
    detected = np.zeros_like(degenerate)
    if degenerate.any():
        for it, isig in np.argwhere(degenerate):
            tt = slice(max(0, it - 1), min(nt, it + 2))
            ss = np.arange(isig - 1, isig + 2) % ns
            detected[tt, ss] = True
        active &= ~detected
    mask = Mask(grid, active)  # re-validates the 50% active floor

    bad = active & (det > -DEGENERACY_TOL)
    if bad.any():
        it, isig = np.argwhere(bad)[0]
        raise GeometryError.at_point(
            f"induced metric is not Lorentzian (det gamma = {det[it, isig]:.3e})", it, isig
        )

    d = -det  # positive on active points
    adj = np.empty_like(gamma)
    adj[..., 0, 0] = gamma[..., 1, 1]
    adj[..., 1, 1] = gamma[..., 0, 0]
    adj[..., 0, 1] = -gamma[..., 0, 1]
    adj[..., 1, 0] = -gamma[..., 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma_inv = -adj / d[..., None, None]
        vol = np.sqrt(np.where(d > 0, d, np.nan))

    if frame is not None:
        normals = np.asarray(frame, dtype=float)
        if normals.shape != (nt, ns, dim - 2, dim):
            raise GeometryError(f"frame override has shape {normals.shape}")
    else:
        normals = _orthonormal_normal_frame(g, e_vals, e_low, gamma_inv, active)
    n_low = np.einsum("...mn,...in->...im", g, normals)

    # extrinsic curvature K_ab^i = -n^i . (dd X + Gamma(bg) e e), symmetrized
    dd = np.empty((nt, ns, 2, 2, dim))
    dd[..., 0, 0, :] = d_tau(dx_t).values
    dd[..., 0, 1, :] = d_sigma(dx_t).values
    dd[..., 1, 0, :] = d_tau(dx_s).values
    dd[..., 1, 1, :] = d_sigma(dx_s).values
    if not bg.flat:
        gamma_bg = bg.christoffel_at(x.values)
        dd = dd + np.einsum("...mnl,...an,...bl->...abm", gamma_bg, e_vals, e_vals)
    K = -np.einsum("...im,...abm->...abi", n_low, dd)
    K = 0.5 * (K + np.swapaxes(K, 2, 3))
    with np.errstate(invalid="ignore"):
        K_mean = np.einsum("...ab,...abi->...i", gamma_inv, K)

    # determinant-weighted Christoffel: Gamma^a_{bc} = P^a_{bc} / (-det)
    gamma_f = Field(grid, gamma, (WORLDSHEET_LOWER, WORLDSHEET_LOWER))
    dgam = np.stack([d_tau(gamma_f).values, d_sigma(gamma_f).values], axis=2)  # (..., c, a, b)
    sym = (
        np.einsum("...bdc->...dbc", dgam)      # d_b gamma_dc
        + np.einsum("...cdb->...dbc", dgam)    # d_c gamma_db
        - np.einsum("...dbc->...dbc", dgam)    # d_d gamma_bc
    )
    p_num = -0.5 * np.einsum("...ad,...dbc->...abc", adj, sym)
    with np.errstate(divide="ignore", invalid="ignore"):
        conn = p_num / d[..., None, None, None]

    # Riemann from the weighted Christoffel; every stencil below acts on the
    # smooth numerator fields, divisions stay pointwise
    p_f = Field(grid, p_num, (WORLDSHEET_UPPER, WORLDSHEET_LOWER, WORLDSHEET_LOWER))
    dp = np.stack([d_tau(p_f).values, d_sigma(p_f).values], axis=2)  # (..., e, a, b, c)
    d_f = Field(grid, d)
    dd_det = np.stack([d_tau(d_f).values, d_sigma(d_f).values], axis=2)  # (..., e)
    num = (
        np.einsum("...cadb,...->...abcd", dp, d)
        - np.einsum("...adb,...c->...abcd", p_num, dd_det)
        - np.einsum("...dacb,...->...abcd", dp, d)
        + np.einsum("...acb,...d->...abcd", p_num, dd_det)
        + np.einsum("...ace,...edb->...abcd", p_num, p_num)
        - np.einsum("...ade,...ecb->...abcd", p_num, p_num)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        riem = num / (d * d)[..., None, None, None, None]
    ricci = np.einsum("...abad->...bd", riem)
    with np.errstate(invalid="ignore"):
        scal = np.einsum("...bd,...bd->...", gamma_inv, ricci)
    einstein = ricci - 0.5 * gamma * scal[..., None, None]

    # normal-bundle connection omega_a^{ij} = g(n^i, D_a n^j), antisymmetrized
    k_codim = dim - 2
    if k_codim == 1:
        omega = np.zeros((nt, ns, 2, 1, 1))
    else:
        n_f = Field(grid, normals, (NORMAL, SPACETIME))
        dn_t, dn_s = _masked_field_derivatives(n_f, active)
        dn = np.stack([dn_t, dn_s], axis=2)  # (nt, ns, a, j, mu)
        if not bg.flat:
            dn = dn + np.einsum("...mnl,...an,...jl->...ajm", gamma_bg, e_vals, normals)
        omega = np.einsum("...im,...ajm->...aij", n_low, dn)
        omega = 0.5 * (omega - np.swapaxes(omega, -1, -2))

    geo = GeometryBundle(
        embedding=emb,
        grid=grid,
        background=bg,
        mask=mask,
        detected=detected,
        g=g,
        e=Field(grid, e_vals, (WORLDSHEET_LOWER, SPACETIME)),
        e_low=e_low,
        gamma=gamma_f,
        gamma_inv=Field(grid, gamma_inv, (WORLDSHEET_UPPER, WORLDSHEET_UPPER)),
        gamma_det=det,
        adjugate=adj,
        vol=Field(grid, vol),
        conn=Field(grid, conn, (WORLDSHEET_UPPER, WORLDSHEET_LOWER, WORLDSHEET_LOWER)),
        conn_numerator=p_num,
        riem=Field(
            grid, riem,
            (WORLDSHEET_UPPER, WORLDSHEET_LOWER, WORLDSHEET_LOWER, WORLDSHEET_LOWER),
        ),
        ricci=Field(grid, ricci, (WORLDSHEET_LOWER, WORLDSHEET_LOWER)),
        scalar=Field(grid, scal),
        einstein=Field(grid, einstein, (WORLDSHEET_LOWER, WORLDSHEET_LOWER)),
        n=Field(grid, normals, (NORMAL, SPACETIME)),
        n_low=n_low,
        K=Field(grid, K, (WORLDSHEET_LOWER, WORLDSHEET_LOWER, NORMAL)),
        K_mean=Field(grid, K_mean, (NORMAL,)),
        normal_conn=Field(grid, omega, (WORLDSHEET_LOWER, NORMAL, NORMAL)),
    )
    _validate_bundle(geo)
    return geo


def _validate_bundle(geo: GeometryBundle, tol: float = 1e-10) -> None:
    act = geo.mask.active
    ident = np.einsum("...ab,...bc->...ac", geo.gamma_inv.values, geo.gamma.values)
    eye = np.eye(2)
    if masked_max_abs(ident - eye, act) > tol:
        raise GeometryError("gamma_inv . gamma deviates from the identity")
    ndotn = np.einsum("...im,...jm->...ij", geo.n_low, geo.n.values)
    k = geo.codim
    if masked_max_abs(ndotn - np.eye(k), act) > 1e-9:
        raise GeometryError("normal frame is not orthonormal")
    ndote = np.einsum("...im,...am->...ia", geo.n_low, geo.e.values)
    if masked_max_abs(ndote, act) > 1e-9:
        raise GeometryError("normal frame is not orthogonal to the tangents")
    for name in ("vol", "conn", "riem", "scalar", "K", "K_mean", "normal_conn"):
        getattr(geo, name).check_finite(geo.mask, name=name)


# ---------------------------------------------------------------------------
# index algebra and covariant derivatives


def _contract_axis(matrix: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    """Contract matrix[..., x, y] with values along ``axis`` (as index y)."""
    moved = np.moveaxis(values, axis, 2)
    rest = moved.shape[3:]
    flat = moved.reshape(moved.shape[:3] + (-1,))
    out = np.einsum("...xy,...yr->...xr", matrix, flat)
    return np.moveaxis(out.reshape(out.shape[:3] + rest), 2, axis)


def raise_index(geo: GeometryBundle, f: Field, pos: int) -> Field:
    if f.indices[pos] != WORLDSHEET_LOWER:
        raise GridError(f"raise_index: position {pos} holds {f.indices[pos]!r}, not 'a'")
    vals = _contract_axis(geo.gamma_inv.values, f.values, 2 + pos)
    labels = list(f.indices)
    labels[pos] = WORLDSHEET_UPPER
    return Field(f.grid, vals, tuple(labels))


def lower_index(geo: GeometryBundle, f: Field, pos: int) -> Field:
    if f.indices[pos] != WORLDSHEET_UPPER:
        raise GridError(f"lower_index: position {pos} holds {f.indices[pos]!r}, not 'A'")
    vals = _contract_axis(geo.gamma.values, f.values, 2 + pos)
    labels = list(f.indices)
    labels[pos] = WORLDSHEET_LOWER
    return Field(f.grid, vals, tuple(labels))


def covariant_gradient(geo: GeometryBundle, f: Field) -> Field:
    """Covariant derivative, prepending one lower worldsheet index.

    Worldsheet indices get Levi-Civita corrections, normal-frame indices get
    the normal-bundle connection; the result on a field with indices
    (i1, ..., ik) carries indices (a, i1, ..., ik).
    """
    grid = f.grid
    nt, ns = grid.shape
    out = np.stack([d_tau(f).values, d_sigma(f).values], axis=2)
    conn = geo.conn.values
    omega = geo.normal_conn.values
    for pos, label in enumerate(f.indices):
        if label == SPACETIME:
            raise GridError("covariant_gradient does not support spacetime indices")
        src = np.moveaxis(f.values, 2 + pos, 2)
        rest = src.shape[3:]
        flat = src.reshape(nt, ns, src.shape[2], -1)
        if label == WORLDSHEET_LOWER:
            corr = -np.einsum("...eca,...er->...car", conn, flat)
        elif label == WORLDSHEET_UPPER:
            corr = np.einsum("...ace,...er->...car", conn, flat)
        elif label == NORMAL:
            corr = np.einsum("...cij,...jr->...cir", omega, flat)
        corr = corr.reshape((nt, ns, 2, flat.shape[2]) + rest)
        out = out + np.moveaxis(corr, 3, 3 + pos)
    return Field(grid, out, (WORLDSHEET_LOWER,) + f.indices)


def normal_gradient(geo: GeometryBundle, phi: Field) -> Field:
    """Normal-bundle covariant derivative of a normal-components field:
    (grad phi)_a^i = d_a phi^i + omega_a^i_j phi^j."""
    if phi.indices != (NORMAL,):
        raise GridError(f"normal_gradient expects a pure normal field, got {phi.indices}")
    if phi.values.shape[-1] != geo.codim:
        raise GridError(
            f"normal field has {phi.values.shape[-1]} components, geometry has codim {geo.codim}"
        )
    return covariant_gradient(geo, phi)


def normal_laplacian(geo: GeometryBundle, phi: Field) -> Field:
    """Worldsheet Laplacian on normal-bundle fields, divergence form.

    Uses the density-weighted inverse metric sqrt(-det) gamma^{ab} =
    -adj^{ab}/sqrt(-det) (conformal weight zero in 2D, hence smooth across
    folds) so the stencils act on well-behaved data.
    """
    w = normal_gradient(geo, phi)
    act = geo.mask.active
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = -geo.adjugate / geo.vol.values[..., None, None]
    v = np.einsum("...ab,...bi->...ai", weight, w.values)
    v = fill_masked_along_sigma(v, act)
    div = (
        d_tau(Field(geo.grid, v[..., 0, :], (NORMAL,))).values
        + d_sigma(Field(geo.grid, v[..., 1, :], (NORMAL,))).values
    )
    rot = np.einsum("...ab,...aij,...bj->...i", geo.gamma_inv.values, geo.normal_conn.values, w.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = div / geo.vol.values[..., None] + rot
    return Field(geo.grid, out, (NORMAL,))


def normal_laplacian_double_trace(geo: GeometryBundle, phi: Field) -> Field:
    """Same Laplacian as the trace of two covariant gradients (cross-check)."""
    h = covariant_gradient(geo, covariant_gradient(geo, phi))
    out = np.einsum("...ab,...abi->...i", geo.gamma_inv.values, h.values)
    return Field(geo.grid, out, (NORMAL,))


def gauss_scalar_curvature(geo: GeometryBundle) -> Field:
    """Scalar curvature from the extrinsic data: K^i K_i - K_ab^i K^{ab i}.

    Valid on flat backgrounds; an independent cross-check of the
    Christoffel-built curvature (and of the extrinsic-curvature sign).
    """
    kup = raise_index(geo, raise_index(geo, geo.K, 0), 1)
    kk = np.einsum("...abi,...abi->...", kup.values, geo.K.values)
    kmean2 = np.einsum("...i,...i->...", geo.K_mean.values, geo.K_mean.values)
    return Field(geo.grid, kmean2 - kk)
