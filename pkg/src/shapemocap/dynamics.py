"""Shape-aware floating-base rigid-body dynamics and motion refinement.

The dynamic model is a 24-body kinematic tree with per-joint mass, com and
inertia from the voxelized body.  Generalized velocities are
quasi-velocities: world linear/angular velocity of the root (6) plus the
relative angular velocity of each joint in its own frame (23 x 3 = 75
total); orientations integrate through the exponential map.

Inverse dynamics is a recursive Newton-Euler pass; the mass matrix comes
from a composite-rigid-body pass (cross-checked against column-wise
inverse dynamics in the tests).  Each frame solves a damped least-squares
problem for accelerations and contact forces with the root's six
equations of motion enforced exactly, then integrates semi-implicitly.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import config
from .body import NUM_JOINTS, foot_vertices, forward_kinematics_batch
from .rotations import exp_so3, hat, log_so3, rot6d_decode

_G = np.asarray(config.GRAVITY)
NV = 6 + 3 * (NUM_JOINTS - 1)  # 75 generalized velocities


@dataclass(frozen=True)
class DynamicModel:
    body: object
    parent: np.ndarray
    offsets: np.ndarray        # (24, 3) rest offsets in the parent frame
    mass: np.ndarray           # (24,)
    com_loc: np.ndarray        # (24, 3) com offset from joint, body frame
    inertia_loc: np.ndarray    # (24, 3, 3) about the com, body frame
    ancestors: tuple           # ancestors[j] = chain root..j inclusive
    contact_bones: np.ndarray    # (8,) patch points: 4 left then 4 right
    contact_offsets: np.ndarray  # (8, 3) body frame
    foot_bones: np.ndarray       # (4,) the spec'd toe/heel vertices
    foot_offsets: np.ndarray     # (4, 3)

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def contact_foot(self, i):
        """0 for left-foot patch points, 1 for right."""
        return 0 if i < len(self.contact_bones) // 2 else 1


def build_dynamic_model(body, props):
    """Assemble the tree; zero-mass joints are lumped into their parent."""
    mass = props.mass.copy()
    com = props.com.copy()
    inertia = props.inertia.copy()
    joints = body.rest_joint_positions()
    for j in range(NUM_JOINTS - 1, 0, -1):
        if mass[j] > 1e-9:
            continue
        warnings.warn(f"joint {j} has zero mass; lumping into parent")
        p = body.skeleton.parent[j]
        mass[j] = 0.0
        inertia[j] = 0.0
        com[j] = 0.0
        # nothing to transfer (zero mass), the parent keeps its properties
        del p
    offs = body.skeleton.rest_offset
    ancestors = []
    for j in range(NUM_JOINTS):
        chain = [j]
        while body.skeleton.parent[chain[0]] >= 0:
            chain.insert(0, body.skeleton.parent[chain[0]])
        ancestors.append(tuple(chain))
    fv = foot_vertices(body)
    bones = body.vertex_bone[fv]
    local = body.vertices_rest[fv] - joints[bones]
    # physics contact patches: each toe/heel vertex widens into a lateral
    # pair so every foot spans a support polygon, not a line
    half_w = 0.03 * body.shape.height_scale
    patch_bones, patch_offsets = [], []
    for k in (0, 1, 2, 3):  # l_toe, l_heel, r_toe, r_heel
        for side in (+1.0, -1.0):
            patch_bones.append(bones[k])
            patch_offsets.append(local[k] + np.array([side * half_w, 0.0, 0.0]))
    order = [0, 1, 2, 3, 4, 5, 6, 7]  # already left (toe+-, heel+-) then right
    return DynamicModel(body=body, parent=body.skeleton.parent.copy(),
                        offsets=offs.copy(), mass=mass, com_loc=com,
                        inertia_loc=inertia, ancestors=tuple(ancestors),
                        contact_bones=np.array(patch_bones)[order],
                        contact_offsets=np.array(patch_offsets)[order],
                        foot_bones=bones, foot_offsets=local)


def joint_cols(j):
    """Generalized-velocity columns of joint j (root: 0:6)."""
    return slice(6 + 3 * (j - 1), 9 + 3 * (j - 1)) if j > 0 else slice(0, 6)


@dataclass
class SimState:
    root_pos: np.ndarray   # (3,) joint-0 world position
    root_R: np.ndarray     # (3, 3)
    local_R: np.ndarray    # (23, 3, 3) joints 1..23
    u: np.ndarray          # (75,) generalized velocity

    @staticmethod
    def from_pose(model, theta, translation, u=None):
        mats = rot6d_decode(np.asarray(theta))
        return SimState(
            root_pos=model.offsets[0] + np.asarray(translation, float),
            root_R=mats[0], local_R=mats[1:],
            u=np.zeros(NV) if u is None else np.asarray(u, float))

    def translation(self, model):
        return self.root_pos - model.offsets[0]

    def theta_matrices(self):
        out = np.empty((NUM_JOINTS, 3, 3))
        out[0] = self.root_R
        out[1:] = self.local_R
        return out

    def copy(self):
        return SimState(self.root_pos.copy(), self.root_R.copy(),
                        self.local_R.copy(), self.u.copy())


def _kinematics(model, state, udot=None, gravity=False):
    """Forward pass: world R, x, w, v (and dw, a when udot given).

    With gravity=True the root linear acceleration is offset by -g, which
    folds gravity into the Newton-Euler force computation.
    """
    R = np.empty((NUM_JOINTS, 3, 3))
    x = np.empty((NUM_JOINTS, 3))
    w = np.empty((NUM_JOINTS, 3))
    v = np.empty((NUM_JOINTS, 3))
    u = state.u
    R[0] = state.root_R
    x[0] = state.root_pos
    v[0] = u[0:3]
    w[0] = u[3:6]
    want_acc = udot is not None
    if want_acc:
        dw = np.empty((NUM_JOINTS, 3))
        a = np.empty((NUM_JOINTS, 3))
        a[0] = udot[0:3] - (_G if gravity else 0.0)
        dw[0] = udot[3:6]
    elif gravity:
        raise ValueError("gravity requires an acceleration pass")
    for j in range(1, NUM_JOINTS):
        p = model.parent[j]
        Lj = state.local_R[j - 1]
        r = R[p] @ model.offsets[j]
        R[j] = R[p] @ Lj
        x[j] = x[p] + r
        wrel = R[j] @ u[joint_cols(j)]
        w[j] = w[p] + wrel
        v[j] = v[p] + np.cross(w[p], r)
        if want_acc:
            a[j] = a[p] + np.cross(dw[p], r) + np.cross(w[p], np.cross(w[p], r))
            dw[j] = dw[p] + np.cross(w[j], wrel) + R[j] @ udot[joint_cols(j)]
    out = {"R": R, "x": x, "w": w, "v": v}
    if want_acc:
        out["dw"] = dw
        out["a"] = a
    return out


def inverse_dynamics(model, state, udot, gravity=True, kin=None):
    """tau = M(q) udot + h(q, u), gravity included by default."""
    udot = np.asarray(udot, float)
    k = _kinematics(model, state, udot, gravity=gravity)
    R, x, w, dw, a = k["R"], k["x"], k["w"], k["dw"], k["a"]
    f = np.zeros((NUM_JOINTS, 3))
    n = np.zeros((NUM_JOINTS, 3))
    tau = np.zeros(NV)
    for j in range(NUM_JOINTS - 1, -1, -1):
        off = R[j] @ model.com_loc[j]
        a_com = a[j] + np.cross(dw[j], off) + np.cross(w[j], np.cross(w[j], off))
        Iw = R[j] @ model.inertia_loc[j] @ R[j].T
        F = model.mass[j] * a_com
        N = Iw @ dw[j] + np.cross(w[j], Iw @ w[j])
        f[j] += F
        n[j] += N + np.cross(off, F)
        p = model.parent[j]
        if p >= 0:
            f[p] += f[j]
            n[p] += n[j] + np.cross(x[j] - x[p], f[j])
        if j > 0:
            tau[joint_cols(j)] = R[j].T @ n[j]
    tau[0:3] = f[0]
    tau[3:6] = n[0]
    return tau


def bias_forces(model, state):
    """h(q, u): generalized forces with zero acceleration, gravity on."""
    return inverse_dynamics(model, state, np.zeros(NV), gravity=True)


def _parallel_axis(d):
    return (d @ d) * np.eye(3) - np.outer(d, d)


def mass_matrix(model, state, kin=None):
    """Composite-rigid-body computation of M(q); symmetric positive
    definite for any valid state."""
    k = kin or _kinematics(model, state)
    R, x = k["R"], k["x"]
    mc = model.mass.copy()
    yc = np.empty((NUM_JOINTS, 3))
    Ic = np.empty((NUM_JOINTS, 3, 3))
    for j in range(NUM_JOINTS):
        yc[j] = x[j] + R[j] @ model.com_loc[j]
        Ic[j] = R[j] @ model.inertia_loc[j] @ R[j].T
    for j in range(NUM_JOINTS - 1, 0, -1):
        p = model.parent[j]
        m_new = mc[p] + mc[j]
        y_new = (mc[p] * yc[p] + mc[j] * yc[j]) / m_new
        Ic[p] = (Ic[p] + mc[p] * _parallel_axis(yc[p] - y_new)
                 + Ic[j] + mc[j] * _parallel_axis(yc[j] - y_new))
        mc[p] = m_new
        yc[p] = y_new

    M = np.zeros((NV, NV))

    def fill(j, axes, col0):
        """Columns for unit accelerations about x[j] along the world axes."""
        for k_ax in range(axes.shape[1]):
            alpha = axes[:, k_ax]
            r = yc[j] - x[j]
            F = mc[j] * np.cross(alpha, r)
            n_j = Ic[j] @ alpha + np.cross(r, F)
            col = col0 + k_ax
            M[0:3, col] = F
            M[3:6, col] = n_j + np.cross(x[j] - x[0], F)
            for l in model.ancestors[j]:
                if l == 0:
                    continue
                nl = n_j + np.cross(x[j] - x[l], F)
                M[joint_cols(l), col] = R[l].T @ nl

    # root linear columns: uniform unit linear acceleration
    for k_ax in range(3):
        e = np.eye(3)[k_ax]
        F = mc[0] * e
        M[0:3, k_ax] = F
        M[3:6, k_ax] = np.cross(yc[0] - x[0], F)
    fill(0, np.eye(3), 3)
    for j in range(1, NUM_JOINTS):
        fill(j, R[j], 6 + 3 * (j - 1))
    # every independent entry lands in the upper triangle (ancestors have
    # smaller indices); mirror it, M is the kinetic-energy metric
    return np.triu(M) + np.triu(M, 1).T


def mass_matrix_via_rnea(model, state):
    """Column-wise inverse dynamics (independent of the CRBA path)."""
    zero_u = state.copy()
    zero_u.u = np.zeros(NV)
    M = np.empty((NV, NV))
    for k in range(NV):
        e = np.zeros(NV)
        e[k] = 1.0
        M[:, k] = inverse_dynamics(model, zero_u, e, gravity=False)
    return M


def point_jacobian(model, kin, bone, point):
    """(3, 75) world Jacobian of a point rigidly attached to a bone."""
    R, x = kin["R"], kin["x"]
    J = np.zeros((3, NV))
    J[:, 0:3] = np.eye(3)
    J[:, 3:6] = -hat(point - x[0])
    for l in model.ancestors[bone]:
        if l == 0:
            continue
        J[:, joint_cols(l)] = -hat(point - x[l]) @ R[l]
    return J


def joint_jacobian(model, kin, joint):
    """Jacobian of joint `joint`'s origin (its own axes do not move it)."""
    R, x = kin["R"], kin["x"]
    J = np.zeros((3, NV))
    J[:, 0:3] = np.eye(3)
    J[:, 3:6] = -hat(x[joint] - x[0])
    for l in model.ancestors[joint][:-1]:
        if l == 0:
            continue
        J[:, joint_cols(l)] = -hat(x[joint] - x[l]) @ R[l]
    return J


def _point_state(kin, bias, bone, local):
    """World position, velocity and bias acceleration of a bone point."""
    R, x, w, v = kin["R"], kin["x"], kin["w"], kin["v"]
    r = R[bone] @ local
    p = x[bone] + r
    vel = v[bone] + np.cross(w[bone], r)
    acc = (bias["a"][bone] + np.cross(bias["dw"][bone], r)
           + np.cross(w[bone], np.cross(w[bone], r)))
    return p, vel, acc


@dataclass
class PdGains:
    kp_rot: float = 400.0
    kd_rot: float = 40.0
    kp_lin: float = 100.0
    kd_lin: float = 20.0
    kp_cart: float = 100.0
    kd_cart: float = 20.0
    kp_contact: float = 400.0       # vertical penetration spring
    kp_contact_xz: float = 100.0    # horizontal anchor stiffness
    kd_contact: float = 50.0
    w_track: float = 1.0           # joint-space tracking
    w_track_root_lin: float = 0.02  # root translation is contact-driven
    w_track_root_ang: float = 1.0   # waist orientation is measured
    w_cart: float = 0.2
    w_contact: float = 30.0
    w_force: float = 1e-4
    friction: float = 0.8
    cart_joints: tuple = (0, 7, 8, 15, 20, 21)
    contact_threshold: float = 0.5
    contact_height: float = 0.05   # contact rows only near the ground
    stick_speed: float = 0.5       # anchor a point only when this slow (m/s)
    stick_grace: int = 6           # frames an anchor survives its flag
    target_leash: float = 0.1      # max root target lead, anti-windup
    force_cap_factor: float = 4.0  # per-point force cap, in body weights
    max_contact_acc: float = 50.0  # saturate contact-row demands
    max_acc: float = 100.0         # saturate PD demands (rad/s^2, m/s^2)
    max_joint_vel: float = 25.0    # integrator velocity limits
    max_root_vel: float = 8.0
    damping: float = 1e-9


@dataclass(frozen=True)
class FrameTargets:
    theta: np.ndarray        # (24, 6) desired pose
    velocities: np.ndarray   # (24, 3) desired world joint velocities
    contacts: np.ndarray     # (2,) probabilities, left/right foot
    dt: float = config.DT

    def __post_init__(self):
        c = np.asarray(self.contacts, float)
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ValueError("contact probabilities must lie in [0, 1]")
        object.__setattr__(self, "theta", np.asarray(self.theta, float))
        object.__setattr__(self, "velocities",
                           np.asarray(self.velocities, float))
        object.__setattr__(self, "contacts", c)


def dual_pd_targets(model, targets, state, root_pos_target, gains=None,
                    kin=None, prev_theta=None):
    """Rotation-space desired accelerations plus Cartesian PD targets.

    prev_theta (previous frame's target pose) supplies desired joint
    angular velocities by finite difference; without it the derivative
    terms damp toward zero velocity.  Returns (udot_des (75,),
    [(joint, desired point acceleration)]).
    """
    g = gains or PdGains()
    k = kin or _kinematics(model, state)
    mats = rot6d_decode(targets.theta)
    if prev_theta is not None:
        prev = rot6d_decode(prev_theta)
        w_des = log_so3(np.swapaxes(prev, -1, -2) @ mats) / targets.dt
        w_des_root = (mats[0] @ w_des[0])  # world frame for the root
    else:
        w_des = np.zeros((NUM_JOINTS, 3))
        w_des_root = np.zeros(3)
    udot = np.zeros(NV)
    udot[0:3] = (g.kp_lin * (root_pos_target - state.root_pos)
                 + g.kd_lin * (targets.velocities[0] - state.u[0:3]))
    udot[3:6] = (g.kp_rot * log_so3(mats[0] @ state.root_R.T)
                 + g.kd_rot * (w_des_root - state.u[3:6]))
    for j in range(1, NUM_JOINTS):
        err = log_so3(state.local_R[j - 1].T @ mats[j])
        udot[joint_cols(j)] = (g.kp_rot * err
                               + g.kd_rot * (w_des[j]
                                             - state.u[joint_cols(j)]))
    np.clip(udot, -g.max_acc, g.max_acc, out=udot)
    # Cartesian joint targets from FK of the desired pose at the target root
    _, p_des = forward_kinematics_batch(model.body, mats,
                                        root_pos_target - model.offsets[0])
    cart = []
    for joint in g.cart_joints:
        J = joint_jacobian(model, k, joint)
        v_cur = J @ state.u
        a_des = (g.kp_cart * (p_des[0, joint] - k["x"][joint])
                 + g.kd_cart * (targets.velocities[joint] - v_cur))
        cart.append((joint, np.clip(a_des, -g.max_acc, g.max_acc)))
    return udot, cart


@dataclass
class OptState:
    sim: SimState
    root_pos_target: np.ndarray
    prev_theta: np.ndarray = None
    anchors: dict = None           # active contact point -> stick position
    fallbacks: int = 0

    @staticmethod
    def from_pose(model, theta, translation, u=None):
        sim = SimState.from_pose(model, theta, translation, u=u)
        return OptState(sim=sim, root_pos_target=sim.root_pos.copy(),
                        anchors={})


@dataclass(frozen=True)
class FrameResult:
    theta: np.ndarray          # (24, 6)
    translation: np.ndarray    # (3,)
    contact_forces: np.ndarray  # (4, 3); zero rows for inactive points
    eom_residual: float        # relative to body weight
    fallback: bool
    tau: np.ndarray            # (75,) with ~zero root rows


def _solve_kkt(A, b, wts, C, d, damping):
    """min ||W(Ax - b)||^2 s.t. Cx = d, via the KKT system."""
    Aw = A * wts[:, None]
    bw = b * wts
    n = A.shape[1]
    m = C.shape[0]
    H = np.zeros((n + m, n + m))
    H[:n, :n] = Aw.T @ Aw + damping * np.eye(n)
    H[:n, n:] = C.T
    H[n:, :n] = C
    rhs = np.concatenate([Aw.T @ bw, d])
    sol = np.linalg.solve(H, rhs)
    return sol[:n]


def optimize_frame(model, targets, opt_state, gains=None):
    """One frame of physics-based refinement.

    Solves for accelerations and contact forces subject to the root's
    equations of motion, applies a friction-pyramid clamp, integrates
    semi-implicitly, and returns the new state plus diagnostics.  On solver
    failure the frame falls back to kinematic integration of the PD target.
    """
    g = gains or PdGains()
    state = opt_state.sim
    dt = targets.dt
    tgt = opt_state.root_pos_target + targets.velocities[0] * dt
    # leaky integrator: never let the reference run far ahead of the body
    lead = tgt - state.root_pos
    dist = np.linalg.norm(lead)
    if dist > g.target_leash:
        tgt = state.root_pos + lead * (g.target_leash / dist)
    opt_state.root_pos_target = tgt

    kin = _kinematics(model, state)
    bias = _kinematics(model, state, np.zeros(NV), gravity=False)
    M = mass_matrix(model, state, kin)
    h = bias_forces(model, state)
    udot_des, cart = dual_pd_targets(model, targets, state,
                                     opt_state.root_pos_target, g, kin,
                                     prev_theta=opt_state.prev_theta)
    opt_state.prev_theta = np.array(targets.theta, copy=True)

    # contact activation: slow flagged-stationary points near the ground
    # stick to an anchor and stay latched while they remain slow and low
    # (hysteresis across flag handoffs); other touching points are only
    # pushed out of the ground
    if opt_state.anchors is None:
        opt_state.anchors = {}
    n_points = len(model.contact_bones)
    active, sticky = [], {}
    for i in range(n_points):
        prob = targets.contacts[model.contact_foot(i)]
        bone = model.contact_bones[i]
        p_i, v_i, _ = _point_state(kin, bias, bone, model.contact_offsets[i])
        near = p_i[1] < g.contact_height
        slow = np.linalg.norm(v_i) < g.stick_speed
        flagged = prob > g.contact_threshold
        entry = opt_state.anchors.get(i)
        in_grace = entry is not None and entry[1] < g.stick_grace
        if near and slow and (flagged or in_grace):
            active.append(i)
            sticky[i] = True
        elif p_i[1] < 0.0 or (flagged and near):
            active.append(i)
            sticky[i] = False
    nc = len(active)

    rows_q = NV
    rows = rows_q + 3 * len(cart) + 3 * nc + 3 * nc
    ncols = NV + 3 * nc
    A = np.zeros((rows, ncols))
    b = np.zeros(rows)
    wts = np.empty(rows)

    A[:NV, :NV] = np.eye(NV)
    b[:NV] = udot_des
    wts[:NV] = np.sqrt(g.w_track)
    wts[0:3] = np.sqrt(g.w_track_root_lin)
    wts[3:6] = np.sqrt(g.w_track_root_ang)
    r = NV
    for joint, a_des in cart:
        J = joint_jacobian(model, kin, joint)
        bias_a = (bias["a"][joint])
        A[r:r + 3, :NV] = J
        b[r:r + 3] = a_des - bias_a
        wts[r:r + 3] = np.sqrt(g.w_cart)
        r += 3

    # stick anchors: a point keeps the ground position it first touched;
    # age counts frames since the contact flag was last set
    for i in list(opt_state.anchors):
        if i not in active or not sticky[i]:
            del opt_state.anchors[i]
    for i in active:
        if not sticky[i]:
            continue
        prob = targets.contacts[model.contact_foot(i)]
        if i in opt_state.anchors:
            anchor, age = opt_state.anchors[i]
            opt_state.anchors[i] = (anchor,
                                    0 if prob > g.contact_threshold else age + 1)

    Jc_list, pts = [], []
    for idx, i in enumerate(active):
        bone = model.contact_bones[i]
        local = model.contact_offsets[i]
        p, vel, acc_b = _point_state(kin, bias, bone, local)
        J = point_jacobian(model, kin, bone, p)
        Jc_list.append(J)
        pts.append(p)
        if sticky[i]:
            if i not in opt_state.anchors:
                opt_state.anchors[i] = (np.array([p[0], 0.0, p[2]]), 0)
            anchor = opt_state.anchors[i][0]
            kp3 = np.array([g.kp_contact_xz, g.kp_contact, g.kp_contact_xz])
            a_des = np.clip(kp3 * (anchor - p) - g.kd_contact * vel,
                            -g.max_contact_acc, g.max_contact_acc)
            A[r:r + 3, :NV] = J
            b[r:r + 3] = a_des - acc_b
            wts[r:r + 3] = np.sqrt(g.w_contact)
        else:
            a_up = np.clip(g.kp_contact * max(0.0, -p[1])
                           - g.kd_contact * vel[1],
                           -g.max_contact_acc, g.max_contact_acc)
            A[r + 1, :NV] = J[1]
            b[r + 1] = a_up - acc_b[1]
            wts[r:r + 3] = 0.0
            wts[r + 1] = np.sqrt(g.w_contact)
        r += 3
    # force regularization rows
    for idx in range(nc):
        cols = NV + 3 * idx
        A[r:r + 3, cols:cols + 3] = np.eye(3)
        wts[r:r + 3] = np.sqrt(g.w_force)
        r += 3

    C = np.zeros((6, ncols))
    C[:, :NV] = M[0:6]
    for idx, J in enumerate(Jc_list):
        C[:, NV + 3 * idx:NV + 3 * idx + 3] = -J[:, 0:6].T
    d = -h[0:6]

    fallback = False
    try:
        x = _solve_kkt(A, b, wts, C, d, g.damping)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("non-finite solution")
        lam = x[NV:].reshape(nc, 3)
        # friction pyramid: non-negative capped normal, clamped tangentials
        f_cap = g.force_cap_factor * model.total_mass * 9.81
        lam_c = lam.copy()
        for i in range(nc):
            lam_c[i, 1] = min(max(lam_c[i, 1], 0.0), f_cap)
            cap = g.friction * lam_c[i, 1]
            lam_c[i, 0] = np.clip(lam_c[i, 0], -cap, cap)
            lam_c[i, 2] = np.clip(lam_c[i, 2], -cap, cap)
        if nc and not np.allclose(lam_c, lam):
            ext = np.zeros(NV)
            for J, l in zip(Jc_list, lam_c):
                ext += J.T @ l
            d2 = -h[0:6] + ext[0:6]
            x2 = _solve_kkt(A[:, :NV], b - A[:, NV:] @ lam_c.ravel(), wts,
                            C[:, :NV], d2, g.damping)
            udot = x2
        else:
            udot = x[:NV]
        lam = lam_c if nc else np.zeros((0, 3))
        if not np.all(np.isfinite(udot)):
            raise np.linalg.LinAlgError("non-finite accelerations")
    except np.linalg.LinAlgError:
        udot = udot_des
        lam = np.zeros((nc, 3))
        fallback = True
        opt_state.fallbacks += 1

    ext = np.zeros(NV)
    for J, l in zip(Jc_list, lam):
        ext += J.T @ l
    tau = M @ udot + h - ext
    residual = np.linalg.norm(tau[0:6]) / (model.total_mass * 9.81)
    if fallback:
        tau = np.zeros(NV)

    u_new = state.u + dt * udot
    # integrator velocity limits: crude joint/actuator bounds that keep the
    # kinetic energy finite when the reference is untrackable
    np.clip(u_new[0:3], -g.max_root_vel, g.max_root_vel, out=u_new[0:3])
    np.clip(u_new[3:], -g.max_joint_vel, g.max_joint_vel, out=u_new[3:])
    state.root_pos = state.root_pos + dt * u_new[0:3]
    state.root_R = exp_so3(dt * u_new[3:6]) @ state.root_R
    for j in range(1, NUM_JOINTS):
        wj = u_new[joint_cols(j)]
        state.local_R[j - 1] = state.local_R[j - 1] @ exp_so3(dt * wj)
    state.u = u_new

    forces = np.zeros((n_points, 3))
    for idx, i in enumerate(active):
        forces[i] = lam[idx]
    from .rotations import rot6d_encode
    theta = rot6d_encode(state.theta_matrices())
    return FrameResult(theta=theta, translation=state.translation(model),
                       contact_forces=forces, eom_residual=float(residual),
                       fallback=fallback, tau=tau)


def mechanical_energy(model, state):
    """Kinetic + gravitational potential energy of the whole body."""
    kin = _kinematics(model, state)
    M = mass_matrix(model, state, kin)
    T = 0.5 * state.u @ M @ state.u
    moment = np.einsum("j,jd->d", model.mass,
                       kin["x"] + np.einsum("jab,jb->ja", kin["R"],
                                            model.com_loc))
    V = -float(_G[1]) * moment[1]
    return float(T + V)


def passive_step(model, state, dt=config.DT, joint_damping=2.0):
    """Unactuated, contact-free step with joint damping (root undamped)."""
    M = mass_matrix(model, state)
    h = bias_forces(model, state)
    tau = np.zeros(NV)
    tau[6:] = -joint_damping * state.u[6:]
    udot = np.linalg.solve(M, tau - h)
    u_new = state.u + dt * udot
    state.root_pos = state.root_pos + dt * u_new[0:3]
    state.root_R = exp_so3(dt * u_new[3:6]) @ state.root_R
    for j in range(1, NUM_JOINTS):
        state.local_R[j - 1] = state.local_R[j - 1] @ exp_so3(
            dt * u_new[joint_cols(j)])
    state.u = u_new
    return state


def warm_start_velocities(targets_list):
    """Initial generalized velocities from the first two target frames."""
    u = np.zeros(NV)
    if len(targets_list) < 2:
        return u
    t0, t1 = targets_list[0], targets_list[1]
    u[0:3] = t0.velocities[0]
    m0 = rot6d_decode(t0.theta)
    m1 = rot6d_decode(t1.theta)
    w_rel = log_so3(np.swapaxes(m0, -1, -2) @ m1) / t0.dt
    u[3:6] = m0[0] @ w_rel[0]
    for j in range(1, NUM_JOINTS):
        u[joint_cols(j)] = w_rel[j]
    return u


def simulate(model, targets_list, initial_theta, initial_translation,
             gains=None, warm_start=True):
    """Run optimize_frame over a target sequence; returns per-frame results."""
    u0 = warm_start_velocities(targets_list) if warm_start else None
    opt = OptState.from_pose(model, initial_theta, initial_translation, u=u0)
    results = []
    for tg in targets_list:
        results.append(optimize_frame(model, tg, opt, gains))
    return results, opt
