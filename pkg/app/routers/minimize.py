"""
质量最小化试验 API 路由
"""
from anyio import to_thread
from fastapi import APIRouter, HTTPException

from ..errors import InvalidInputError
from ..models import RunReport, RunRequest
from ..services.trial_service import TrialService
from .forge import resolve_request

router = APIRouter(prefix="/api/minimize", tags=["质量试验"])


@router.post("", response_model=RunReport)
async def minimize(request: RunRequest):
    """
    现场锻造后对随机竞争闭路做质量比较

    - **model**: straight2d / wavy2d / twocircle3d
    - **competitors**: 竞争闭路数量
    - **seed**: 随机种子
    - **complexity**: Fourier 模数（≥ 3）
    - **competitor_amplitude**: 扰动幅度上界
    - **corrupt**: none / metric（负对照）
    """
    config = resolve_request(request)
    try:
        envelope, _ = await to_thread.run_sync(lambda: TrialService.run(config))
        return envelope
    except InvalidInputError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
