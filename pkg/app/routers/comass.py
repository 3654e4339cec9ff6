"""
comass 计算 API 路由
"""
from anyio import to_thread
from fastapi import APIRouter, HTTPException

from ..config import settings
from ..errors import InvalidInputError, UnsupportedComassError
from ..models import ComassEstimatePayload, ComassRequest
from ..services.comass_service import ComassService

router = APIRouter(prefix="/api/comass", tags=["comass"])


@router.post("", response_model=ComassEstimatePayload)
async def estimate_comass(request: ComassRequest):
    """
    估计交错形式的 comass

    - **form**: 形式 {"n","p","terms":[{"idx","c"}]}
    - **metric**: 度量 {"n","entries"}（可选，缺省为标准内积）
    - **method**: auto / exact / ascent / bruteforce
    - **samples**: 随机采样数
    - **starts**: 上升起点数
    - **seed**: 随机种子
    """
    try:
        return await to_thread.run_sync(
            lambda: ComassService.from_request(request, workers=settings.THREADS)
        )
    except (InvalidInputError, UnsupportedComassError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
