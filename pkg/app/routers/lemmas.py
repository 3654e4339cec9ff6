"""
逐点引理套件 API 路由
"""
from anyio import to_thread
from fastapi import APIRouter, HTTPException

from ..config import settings
from ..errors import InvalidInputError
from ..services.lemma_service import LemmaService
from ..models import LemmaRequest

router = APIRouter(prefix="/api/lemmas", tags=["引理套件"])


@router.get("")
async def list_suites():
    """可用套件列表"""
    return {"suites": LemmaService.suite_names()}


@router.post("")
async def run_suites(request: LemmaRequest):
    """
    运行引理套件

    - **suite**: 套件名（如 L3.1）或 all
    - **trials**: 每个套件的试验次数（可选）
    - **seed**: 随机种子
    """
    try:
        report = await to_thread.run_sync(
            lambda: LemmaService.run(request.suite, request.trials, request.seed, settings.THREADS)
        )
        return report.to_json_dict()
    except InvalidInputError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
