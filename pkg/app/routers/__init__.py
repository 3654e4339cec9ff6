# Routers package
from .comass import router as comass_router
from .lemmas import router as lemmas_router
from .forge import router as forge_router
from .minimize import router as minimize_router

__all__ = ["comass_router", "lemmas_router", "forge_router", "minimize_router"]
