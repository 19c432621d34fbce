"""GRU and LSTM cells with explicit forward and backward passes.

Sequences are processed time-major (T, B, features).  Input projections for
all timesteps are batched into one matrix product; only the recurrent
coupling runs step by step.  Backward passes accumulate per-step gate
gradients and reduce the weight gradients with single large products.

Gate conventions:
  GRU:  r = sig(W_r x + U_r h + b_r), z = sig(W_z x + U_z h + b_z),
        hcand = tanh(W_h x + U_h (r*h) + b_h), h' = (1-z)*h + z*hcand
  LSTM: f, i, o = sig(gate affines), g = tanh(affine),
        c' = f*c + i*g, h' = o*tanh(c')
"""

from __future__ import annotations

import numpy as np

__all__ = ["GruCell", "LstmCell", "make_cell"]


def sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow-free: sigmoid(x) = (1 + tanh(x/2)) / 2, and tanh saturates cleanly
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    return q[:rows, :cols]


def _glorot(fan_in: int, fan_out: int, shape, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class GruCell:
    """Gated recurrent unit: reset and update gates plus a candidate state."""

    n_gates = 3

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float64):
        H = hidden
        self.input_dim = input_dim
        self.hidden = hidden
        w = np.concatenate(
            [_glorot(input_dim, H, (input_dim, H), rng) for _ in range(3)], axis=1
        )
        u_rz = np.concatenate([_orthogonal(H, H, rng) for _ in range(2)], axis=1)
        u_h = _orthogonal(H, H, rng)
        self.params = {
            "w": w.astype(dtype),
            "u_rz": u_rz.astype(dtype),
            "u_h": u_h.astype(dtype),
            "b": np.zeros(3 * H, dtype=dtype),
        }

    def step(self, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
        """Single timestep: (B, in), (B, H) -> (B, H)."""
        H = self.hidden
        gx = x @ self.params["w"] + self.params["b"]
        rz = sigmoid(gx[:, : 2 * H] + h_prev @ self.params["u_rz"])
        r, z = rz[:, :H], rz[:, H:]
        hcand = np.tanh(gx[:, 2 * H :] + (r * h_prev) @ self.params["u_h"])
        return (1.0 - z) * h_prev + z * hcand

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Full sequence: (T, B, in) -> ((T, B, H), cache)."""
        T, B, _ = x.shape
        H = self.hidden
        w, u_rz, u_h, b = (self.params[k] for k in ("w", "u_rz", "u_h", "b"))
        gx = (x.reshape(T * B, -1) @ w + b).reshape(T, B, 3 * H)
        rzs = np.empty((T, B, 2 * H), dtype=x.dtype)
        hcands = np.empty((T, B, H), dtype=x.dtype)
        hs = np.empty((T, B, H), dtype=x.dtype)
        h = np.zeros((B, H), dtype=x.dtype)
        for t in range(T):
            rz = sigmoid(gx[t, :, : 2 * H] + h @ u_rz)
            r, z = rz[:, :H], rz[:, H:]
            hcand = np.tanh(gx[t, :, 2 * H :] + (r * h) @ u_h)
            h = h + z * (hcand - h)
            rzs[t] = rz
            hcands[t] = hcand
            hs[t] = h
        return hs, (x, rzs, hcands, hs)

    def backward(self, cache: tuple, dh_seq: np.ndarray) -> tuple[np.ndarray, dict]:
        x, rzs, hcands, hs = cache
        T, B, _ = x.shape
        H = self.hidden
        u_rz, u_h, w = self.params["u_rz"], self.params["u_h"], self.params["w"]
        dgates = np.empty((T, B, 3 * H), dtype=x.dtype)
        carry = np.zeros((B, H), dtype=x.dtype)
        zero_h = np.zeros((B, H), dtype=x.dtype)
        for t in range(T - 1, -1, -1):
            h_prev = hs[t - 1] if t > 0 else zero_h
            r, z = rzs[t, :, :H], rzs[t, :, H:]
            hcand = hcands[t]
            dh = dh_seq[t] + carry
            dz = dh * (hcand - h_prev)
            da_h = dh * z * (1.0 - hcand * hcand)
            drh = da_h @ u_h.T
            da_r = drh * h_prev * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            dgates[t, :, :H] = da_r
            dgates[t, :, H : 2 * H] = da_z
            dgates[t, :, 2 * H :] = da_h
            carry = dh * (1.0 - z) + drh * r + np.concatenate([da_r, da_z], axis=1) @ u_rz.T
        h_prev_seq = np.concatenate([zero_h[None], hs[:-1]], axis=0)
        flat_g = dgates.reshape(T * B, 3 * H)
        flat_x = x.reshape(T * B, -1)
        flat_hp = h_prev_seq.reshape(T * B, H)
        rh = (rzs[:, :, :H] * h_prev_seq).reshape(T * B, H)
        grads = {
            "w": flat_x.T @ flat_g,
            "u_rz": flat_hp.T @ flat_g[:, : 2 * H],
            "u_h": rh.T @ flat_g[:, 2 * H :],
            "b": flat_g.sum(axis=0),
        }
        dx = (flat_g @ w.T).reshape(x.shape)
        return dx, grads


class LstmCell:
    """Long short-term memory cell with forget, input and output gates."""

    n_gates = 4

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float64):
        H = hidden
        self.input_dim = input_dim
        self.hidden = hidden
        w = np.concatenate(
            [_glorot(input_dim, H, (input_dim, H), rng) for _ in range(4)], axis=1
        )
        u = np.concatenate([_orthogonal(H, H, rng) for _ in range(4)], axis=1)
        self.params = {
            "w": w.astype(dtype),
            "u": u.astype(dtype),
            "b": np.zeros(4 * H, dtype=dtype),
        }

    def step(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
        """Single timestep: returns (h, c)."""
        H = self.hidden
        a = x @ self.params["w"] + self.params["b"] + h_prev @ self.params["u"]
        f = sigmoid(a[:, :H])
        i = sigmoid(a[:, H : 2 * H])
        o = sigmoid(a[:, 2 * H : 3 * H])
        g = np.tanh(a[:, 3 * H :])
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        T, B, _ = x.shape
        H = self.hidden
        w, u, b = (self.params[k] for k in ("w", "u", "b"))
        gx = (x.reshape(T * B, -1) @ w + b).reshape(T, B, 4 * H)
        gates = np.empty((T, B, 4 * H), dtype=x.dtype)  # f, i, o post-sig; g post-tanh
        cs = np.empty((T, B, H), dtype=x.dtype)
        tcs = np.empty((T, B, H), dtype=x.dtype)
        hs = np.empty((T, B, H), dtype=x.dtype)
        h = np.zeros((B, H), dtype=x.dtype)
        c = np.zeros((B, H), dtype=x.dtype)
        for t in range(T):
            a = gx[t] + h @ u
            fio = sigmoid(a[:, : 3 * H])
            g = np.tanh(a[:, 3 * H :])
            f, i, o = fio[:, :H], fio[:, H : 2 * H], fio[:, 2 * H :]
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[t, :, : 3 * H] = fio
            gates[t, :, 3 * H :] = g
            cs[t] = c
            tcs[t] = tc
            hs[t] = h
        return hs, (x, gates, cs, tcs, hs)

    def backward(self, cache: tuple, dh_seq: np.ndarray) -> tuple[np.ndarray, dict]:
        x, gates, cs, tcs, hs = cache
        T, B, _ = x.shape
        H = self.hidden
        u, w = self.params["u"], self.params["w"]
        dgates = np.empty((T, B, 4 * H), dtype=x.dtype)
        carry_h = np.zeros((B, H), dtype=x.dtype)
        carry_c = np.zeros((B, H), dtype=x.dtype)
        zero_h = np.zeros((B, H), dtype=x.dtype)
        for t in range(T - 1, -1, -1):
            f = gates[t, :, :H]
            i = gates[t, :, H : 2 * H]
            o = gates[t, :, 2 * H : 3 * H]
            g = gates[t, :, 3 * H :]
            tc = tcs[t]
            c_prev = cs[t - 1] if t > 0 else zero_h
            dh = dh_seq[t] + carry_h
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + carry_c
            dgates[t, :, :H] = dc * c_prev * f * (1.0 - f)
            dgates[t, :, H : 2 * H] = dc * g * i * (1.0 - i)
            dgates[t, :, 2 * H : 3 * H] = do * o * (1.0 - o)
            dgates[t, :, 3 * H :] = dc * i * (1.0 - g * g)
            carry_c = dc * f
            carry_h = dgates[t] @ u.T
        h_prev_seq = np.concatenate([zero_h[None], hs[:-1]], axis=0)
        flat_g = dgates.reshape(T * B, 4 * H)
        grads = {
            "w": x.reshape(T * B, -1).T @ flat_g,
            "u": h_prev_seq.reshape(T * B, H).T @ flat_g,
            "b": flat_g.sum(axis=0),
        }
        dx = (flat_g @ w.T).reshape(x.shape)
        return dx, grads


def make_cell(kind: str, input_dim: int, hidden: int, rng: np.random.Generator,
              dtype=np.float64):
    if kind == "gru":
        return GruCell(input_dim, hidden, rng, dtype)
    if kind == "lstm":
        return LstmCell(input_dim, hidden, rng, dtype)
    raise ValueError(f"unknown cell kind {kind!r}")
