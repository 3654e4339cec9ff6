"""
comass 计算服务
"""
import logging
from typing import Optional

from ..config import settings
from ..errors import InvalidInputError
from ..geometry.comass import comass, comass_ascent, comass_bruteforce, comass_exact
from ..geometry.multilinear import AltForm, MetricPoint
from ..models import ComassEstimatePayload, ComassMode, ComassRequest

logger = logging.getLogger(__name__)


class ComassService:
    """comass 服务类"""

    @classmethod
    def estimate(
        cls,
        form: AltForm,
        metric: Optional[MetricPoint] = None,
        method: ComassMode = ComassMode.AUTO,
        samples: Optional[int] = None,
        starts: Optional[int] = None,
        seed: int = 0,
        tol: Optional[float] = None,
        workers: int = 1,
    ) -> ComassEstimatePayload:
        """
        按指定方式估计 comass

        Args:
            form: p 次形式
            metric: 度量，缺省为标准内积
            method: auto / exact / ascent / bruteforce；exact 不支持时直接报错
            samples: 随机采样数
            starts: 上升起点数
            seed: 随机种子
            tol: 上升收敛容差
            workers: 线程数

        Returns:
            区间估计与见证标架
        """
        metric = metric or MetricPoint.identity(form.n)
        if metric.n != form.n:
            raise InvalidInputError(f"度量维数 {metric.n} 与形式维数 {form.n} 不符")
        samples = samples or settings.COMASS_SAMPLES
        starts = starts or settings.COMASS_STARTS
        tol = tol or settings.ASCENT_TOL

        if method is ComassMode.EXACT:
            est = comass_exact(form, metric)
        elif method is ComassMode.ASCENT:
            est = comass_ascent(
                form, metric, starts=starts, tol=tol, seed=seed, workers=workers,
                max_iter=settings.ASCENT_MAX_ITER,
            )
        elif method is ComassMode.BRUTEFORCE:
            est = comass_bruteforce(form, metric, samples=samples, seed=seed, workers=workers)
        else:
            est = comass(form, metric, starts=starts, samples=samples, seed=seed, workers=workers, tol=tol)
        logger.info(f"comass n={form.n} p={form.p}: [{est.lower:.9f}, {est.upper:.9f}] ({est.method.value})")
        return ComassEstimatePayload.from_estimate(est)

    @classmethod
    def from_request(cls, request: ComassRequest, workers: int = 1) -> ComassEstimatePayload:
        return cls.estimate(
            request.form.to_form(),
            request.metric.to_metric() if request.metric else None,
            method=request.method,
            samples=request.samples,
            starts=request.starts,
            seed=request.seed,
            tol=request.tol,
            workers=workers,
        )
