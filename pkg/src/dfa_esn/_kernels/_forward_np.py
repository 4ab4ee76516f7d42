"""Pure-numpy reservoir time-stepping kernel (fallback backend)."""

import numpy as np

ACT_LOGISTIC = 0
ACT_TANH = 1


def _logistic(z, out):
    # stable logistic: exp only ever sees non-positive arguments
    np.clip(z, -709.0, 709.0, out=z)
    pos = z >= 0
    e = np.exp(np.where(pos, -z, z))
    np.divide(1.0, 1.0 + e, out=out, where=pos)
    np.divide(e, 1.0 + e, out=out, where=~pos)


def layer_sequence(w_in, w_rec, inputs, alpha, activation, out_states, x0):
    """Run one reservoir layer over a batch of input sequences.

    inputs: (T, S, A); out_states: (T, S, N) written in place; x0: (S, N)
    starting state. Update per step: x <- (1-alpha) x + alpha f(u W_in^T + x W_rec^T).
    """
    T = inputs.shape[0]
    x = np.array(x0, dtype=np.float64, copy=True)
    z = np.empty_like(x)
    f = np.empty_like(x)
    for t in range(T):
        np.matmul(inputs[t], w_in.T, out=z)
        z += x @ w_rec.T
        if activation == ACT_TANH:
            np.tanh(z, out=f)
        else:
            _logistic(z, f)
        x *= 1.0 - alpha
        f *= alpha
        x += f
        out_states[t] = x
