"""
Shape factor: background-subtracted pulsed clicks over cw clicks in the window
"""

import logging

import numpy as np

from spadrecon.charfit.schemas import ShapeFactor
from spadrecon.core.schemas import CycleWindow
from spadrecon.errors import InputError, ZeroDenominatorError
from spadrecon.tags.extraction import clicks_in_window
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)


def shape_factor(pulsed: TimeTagStream, cw: TimeTagStream, window: CycleWindow, r_b: float) -> ShapeFactor:
    """
    f_s = (N_pd - N_bg) / (N_cw - N_bg) over equal numbers of cycles

    The uncertainty treats N_pd, N_cw and N_bg as Poisson counts:

        (df/f)^2 = N_pd / Npd~^2 + N_cw / Ncw~^2 + ((N_pd - N_cw) / (Npd~ Ncw~))^2 N_bg

    Raises:
        InputError: If the streams differ in cycle count or are empty
        ZeroDenominatorError: If the background-subtracted cw count is not positive
    """
    if pulsed.n_cycles != cw.n_cycles:
        raise InputError(f"Pulsed and cw data need equal cycle counts ({pulsed.n_cycles} vs {cw.n_cycles})")
    if pulsed.n_cycles == 0:
        raise InputError("Shape factor needs at least one cycle")

    n_pulsed = int(clicks_in_window(pulsed, window).sum())
    n_cw = int(clicks_in_window(cw, window).sum())
    n_bg = r_b * window.duration * pulsed.n_cycles
    pulsed_net = n_pulsed - n_bg
    cw_net = n_cw - n_bg
    if cw_net <= 0:
        raise ZeroDenominatorError(f"cw clicks ({n_cw}) do not exceed the background ({n_bg:.4g})")

    f_s = pulsed_net / cw_net
    # multiplied through by f^2 so that pulsed_net = 0 stays finite
    variance = (n_pulsed + f_s ** 2 * n_cw + ((n_pulsed - n_cw) / cw_net) ** 2 * n_bg) / cw_net ** 2
    sigma = float(np.sqrt(variance))
    logger.info(f"[CharFit] Shape factor {f_s:.5g} +/- {sigma:.2g} ({n_pulsed} pulsed, {n_cw} cw clicks)")
    return ShapeFactor(f_s=float(f_s), sigma=sigma, n_pulsed=n_pulsed, n_cw=n_cw, n_background=float(n_bg))
