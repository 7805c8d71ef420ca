import numpy as np
import pandas as pd


def relative_decrease(previous, current):
    """
    (L_prev - L_cur) / (|L_prev| + 1).
    """
    return (previous - current) / (abs(previous) + 1.0)


def trace_frame(trace):
    """
    Convergence trace as a frame with one row per outer iteration.
    """
    trace = np.asarray(trace, dtype=float)
    decrease = np.concatenate(([np.nan], [relative_decrease(a, b) for a, b in zip(trace[:-1], trace[1:])]))
    return pd.DataFrame(
        {
            "iteration": np.arange(trace.shape[0]),
            "penalized_nll": trace,
            "relative_decrease": decrease,
        }
    )


def lambda_grid(start, stop, step):
    """
    Increasing grid start, start + step, ..., stop (inclusive).
    """
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)
