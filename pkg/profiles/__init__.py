from .poly_bump import PolyBump
from .sine_bump import SineBump
from .gauss_bump import GaussBump
from .random_bump import RandomBump
from .history import ZeroHistory, ConstantHistory, ExpDecayHistory

INITIAL_PROFILES = {
    PolyBump.name: PolyBump,
    SineBump.name: SineBump,
    GaussBump.name: GaussBump,
    RandomBump.name: RandomBump,
}

HISTORY_PROFILES = {
    ZeroHistory.name: ZeroHistory,
    ConstantHistory.name: ConstantHistory,
    ExpDecayHistory.name: ExpDecayHistory,
}
