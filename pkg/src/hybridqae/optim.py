import numpy as np


class Adam:
    """Plain Adam over a flat parameter vector (or a list of arrays)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params, grads):
        """Return updated copies of `params`; accepts an array or list of arrays."""
        single = isinstance(params, np.ndarray)
        if single:
            params, grads = [params], [grads]
        if self._m is None:
            self._m = [np.zeros_like(p, dtype=float) for p in params]
            self._v = [np.zeros_like(p, dtype=float) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            m_hat = self._m[i] / (1 - b1**self.t)
            v_hat = self._v[i] / (1 - b2**self.t)
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out[0] if single else out
