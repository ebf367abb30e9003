import numpy as np

from catvae.ml.autodiff import ParamStore


class AdamOptimizer:
    """Adam over a ParamStore's flat vector, updated in place (single writer)."""

    def __init__(
        self,
        store: ParamStore,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.store = store
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(store.size)
        self.v = np.zeros(store.size)
        self.t = 0

    def step(self, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        self.store.vector -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
