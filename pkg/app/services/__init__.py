# Services package
from .comass_service import ComassService
from .lemma_service import LemmaService
from .forge_service import ForgeService
from .trial_service import TrialService

__all__ = ["ComassService", "LemmaService", "ForgeService", "TrialService"]
