"""Error and flag trajectory figures; never touches numerical outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_result(result, out_dir, max_points=2000):
    honest = result.uncompromised
    if not honest or result.errors.size == 0:
        return []
    t_len = result.errors.shape[0]
    stride = max(1, t_len // max_points)
    t = np.arange(0, t_len, stride)
    norm = np.linalg.norm(result.theta) or 1.0

    fig, (ax_e, ax_f) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_e.semilogy(t, result.errors[t][:, honest] / norm, lw=0.6, alpha=0.6)
    ax_e.set_ylabel("relative error")
    ax_e.set_title(result.config.get("name", "scenario"))
    ax_f.step(t, result.flags[t][:, honest], where="post", lw=0.6, alpha=0.6)
    ax_f.set_ylim(-0.1, 1.1)
    ax_f.set_yticks([0, 1])
    ax_f.set_ylabel("flag")
    ax_f.set_xlabel("iteration")
    fig.tight_layout()
    path = out_dir / "trajectories.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
