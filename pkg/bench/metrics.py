import math


def compute_tau(velocity_nodes: int) -> float:
    """Шаг по времени tau = N^{-1/2}, N - число узлов скорости."""
    if velocity_nodes < 1:
        raise ValueError(f"Velocity node count must be >= 1, got {velocity_nodes}")
    return velocity_nodes ** -0.5


def compute_eff(wall_time: float, processes: int, dofs: int) -> float:
    """Миллисекунды на степень свободы: wall_time(ms) * processes / dofs."""
    if wall_time < 0 or processes < 1 or dofs < 1:
        raise ValueError(f"Invalid efficiency inputs: wall_time={wall_time}, processes={processes}, dofs={dofs}")
    return wall_time * 1000.0 * processes / dofs


def rescale_eff(eff: float, threshold: float) -> float:
    """Приведение Eff, измеренной при пороге threshold, к порогу 1e-10."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return eff * 10.0 / abs(math.log10(threshold))
