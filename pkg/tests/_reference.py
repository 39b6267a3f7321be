"""Plain scalar Q-learning written independently of the package, used as an
oracle. It follows the same random-number protocol: one uniform draw per step
for the exploration test, an integer draw only when exploring, and one uniform
draw per stochastic transition."""
import numpy as np


def scalar_q_learning(P, R, start, terminals, gamma, alpha, episodes, episode_length, eps_at, rng):
    S, A, _ = P.shape
    q = np.zeros((S, A))
    terminal = np.zeros(S, dtype=bool)
    terminal[list(terminals)] = True
    episodic = bool(terminals)
    trace = []
    s = start
    for episode in range(episodes):
        eps = eps_at(episode)
        if episodic or terminal[s]:
            s = start
        for _ in range(episode_length):
            if terminal[s]:
                break
            if rng.random() < eps:
                a = int(rng.integers(A))
            else:
                a = int(np.argmax(q[s]))
            succ = np.flatnonzero(P[s, a] > 0)
            if len(succ) == 1:
                s2 = int(succ[0])
            else:
                cum = np.cumsum(P[s, a, succ])
                u = rng.random() * cum[-1]
                s2 = int(succ[min(int(np.searchsorted(cum, u, side="right")), len(succ) - 1)])
            r = R[s, a]
            target = r if terminal[s2] else r + gamma * q[s2].max()
            q[s, a] += alpha * (target - q[s, a])
            trace.append((s, a, s2))
            s = s2
    return q, trace
