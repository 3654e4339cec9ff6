"""
标定对锻造 API 路由
"""
from anyio import to_thread
from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from ..config import RunConfig
from ..errors import InvalidInputError
from ..models import RunReport, RunRequest
from ..services.forge_service import ForgeService

router = APIRouter(prefix="/api/forge", tags=["锻造"])


def resolve_request(request: RunRequest) -> RunConfig:
    """请求字段覆盖默认值与环境变量；HTTP 接口不写场文件"""
    try:
        return RunConfig.resolve(overrides=request.model_dump(exclude_none=True))
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False))


@router.post("", response_model=RunReport)
async def forge(request: RunRequest):
    """
    锻造并认证标定对，认证失败时报告中 pass 为 false

    - **model**: straight2d / wavy2d / twocircle3d
    - **resolution**: 每轴网格点数（可选）
    - **amplitude**: wavy2d 的振幅
    - **epsilon_factor**: ε 与 reach 之比
    - **corrupt**: none / rho（负对照）
    """
    config = resolve_request(request)
    try:
        envelope, _ = await to_thread.run_sync(lambda: ForgeService.run(config))
        return envelope
    except InvalidInputError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
