from . import dagmf, ishikawa, potts
from .common import EnergyReport, NumericalCollapse, SolverConfig

__all__ = ["potts", "dagmf", "ishikawa", "SolverConfig", "EnergyReport",
           "NumericalCollapse", "solve"]


def solve(model, config: SolverConfig | None = None):
    """Dispatch to the solver matching the model type.

    Returns the end-label fields stacked in ``names_of(model)`` order and the
    `EnergyReport`.
    """
    from ..graph import DagModel, IshikawaModel, PottsModel

    if isinstance(model, PottsModel):
        return potts.run(model, config)
    if isinstance(model, IshikawaModel):
        return ishikawa.run(model, config)
    if isinstance(model, DagModel):
        labels, report = dagmf.run(model, config)
        return dagmf.end_label_stack(model, labels), report
    raise TypeError(f"not a label model: {type(model).__name__}")
