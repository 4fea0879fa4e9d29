"""INI configuration files for the device model and the detection chain.

Frequencies are given in Hz and converted to rad/s.  Example device file::

    [mode_e]
    kappa_hz = 11e6
    eta = 0.41

    [mode_o]
    kappa_hz = 28e6
    eta = 0.38
    delta_hz = 0

    [mode_t]
    kappa_hz = 28e6        ; delta_hz defaults to -delta_hz of mode_o

    [mode_tm]
    kappa_hz = 28e6        ; delta_hz defaults to that of mode_t

    [pump]
    kappa_hz = 28e6
    g0_hz = 37
    J_hz = 280e6
    cooperativity = 0.18   ; or n_photons, or drive_amplitude

    [bath]
    n_e_int = 0.07
    n_e_wg = 0.0

    [analysis]              ; optional, used by the spectra command
    window_ns = 200
    n_bins = 6
"""
from __future__ import annotations

import configparser
import re
from dataclasses import replace
from pathlib import Path

import numpy as np

from .measurement import DetectionChain, GainCurve
from .model import (BathOccupancy, ModeParams, PumpParams, SystemConfig, TWO_PI, drive_for_photons)

_KEYS = {
    "mode_e": {"kappa_hz", "eta", "delta_hz"},
    "mode_o": {"kappa_hz", "eta", "delta_hz"},
    "mode_t": {"kappa_hz", "eta", "delta_hz"},
    "mode_tm": {"kappa_hz", "eta", "delta_hz"},
    "pump": {"kappa_hz", "eta", "delta_hz", "g0_hz", "j_hz", "drive_amplitude", "n_photons", "cooperativity"},
    "bath": {"n_e_int", "n_e_wg"},
    "analysis": {"window_ns", "n_bins"},
}
_CHAIN_KEYS = {
    "chain": {"if_hz"},
    "microwave": {"n_add", "n_add_sigma", "gain_db", "gain_table", "lo_sign"},
    "optical": {"n_add", "n_add_sigma", "gain_db", "gain_table", "lo_sign"},
}


class ConfigError(ValueError):
    def __init__(self, path, message, line=None, key=None):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.key = path, line, key


def _line_of(text: str, section: str, key: str | None):
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return n
            continue
        if current == section and key and re.match(rf"{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return n
    return None


class _Reader:
    def __init__(self, path, allowed: dict):
        self.path = Path(path)
        self.text = self.path.read_text()
        self.cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            self.cp.read_string(self.text, source=str(self.path))
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(self.path, f"malformed file ({exc.__class__.__name__})", line) from exc
        for sec in self.cp.sections():
            if sec not in allowed:
                raise ConfigError(self.path, f"unknown section [{sec}]", _line_of(self.text, sec, None))
            for key in self.cp[sec]:
                if key not in allowed[sec]:
                    raise ConfigError(self.path, f"unknown key '{key}' in [{sec}]", _line_of(self.text, sec, key),
                                      key)

    def has(self, sec, key):
        return self.cp.has_section(sec) and self.cp.has_option(sec, key)

    def require_section(self, sec):
        if not self.cp.has_section(sec):
            raise ConfigError(self.path, f"missing section [{sec}]")

    def float(self, sec, key, default=None, positive=False, unit=1.0):
        if not self.has(sec, key):
            if default is None:
                raise ConfigError(self.path, f"missing key '{key}' in [{sec}]", _line_of(self.text, sec, None), key)
            return default * unit
        raw = self.cp[sec][key]
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(self.path, f"key '{key}' in [{sec}] is not a number: {raw!r}",
                              _line_of(self.text, sec, key), key) from None
        if not np.isfinite(value) or (positive and value <= 0):
            raise ConfigError(self.path, f"key '{key}' in [{sec}] must be {'positive' if positive else 'finite'}",
                              _line_of(self.text, sec, key), key)
        return value * unit

    def fail(self, sec, key, message):
        raise ConfigError(self.path, message, _line_of(self.text, sec, key), key)


def load_system_config(path) -> SystemConfig:
    r = _Reader(path, _KEYS)

    def mode(sec, delta_default=0.0):
        r.require_section(sec)
        try:
            return ModeParams(kappa=r.float(sec, "kappa_hz", positive=True, unit=TWO_PI),
                              eta=r.float(sec, "eta", 1.0),
                              delta=r.float(sec, "delta_hz", delta_default / TWO_PI, unit=TWO_PI))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            r.fail(sec, "eta", f"[{sec}]: {exc}")

    e = mode("mode_e")
    o = mode("mode_o")
    t = mode("mode_t", -o.delta)
    tm = mode("mode_tm", t.delta)
    try:
        bath = BathOccupancy(r.float("bath", "n_e_int", 0.0), r.float("bath", "n_e_wg", 0.0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        r.fail("bath", "n_e_int", f"[bath]: {exc}")

    r.require_section("pump")
    sources = [k for k in ("drive_amplitude", "n_photons", "cooperativity") if r.has("pump", k)]
    if len(sources) > 1:
        r.fail("pump", sources[1], f"[pump] sets both '{sources[0]}' and '{sources[1]}'; give only one")
    try:
        pump = PumpParams(kappa_p=r.float("pump", "kappa_hz", positive=True, unit=TWO_PI),
                          eta_p=r.float("pump", "eta", 1.0),
                          delta_p=r.float("pump", "delta_hz", 0.0, unit=TWO_PI),
                          g0=r.float("pump", "g0_hz", 0.0, unit=TWO_PI),
                          J=r.float("pump", "j_hz", 0.0, unit=TWO_PI))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        r.fail("pump", None, f"[pump]: {exc}")
    cfg = SystemConfig(e, o, t, tm, pump, bath)
    if sources == ["drive_amplitude"]:
        cfg = replace(cfg, pump=replace(pump, drive_amplitude=r.float("pump", "drive_amplitude")))
    elif sources == ["n_photons"]:
        n_p = r.float("pump", "n_photons")
        if n_p < 0:
            r.fail("pump", "n_photons", "key 'n_photons' in [pump] must be non-negative")
        cfg = replace(cfg, pump=replace(pump, drive_amplitude=drive_for_photons(pump, n_p)))
    elif sources == ["cooperativity"]:
        C = r.float("pump", "cooperativity")
        if not 0 <= C < 1:
            r.fail("pump", "cooperativity", "key 'cooperativity' in [pump] must lie in [0, 1)")
        if pump.g0 <= 0:
            if C > 0:
                r.fail("pump", "g0_hz", "a non-zero cooperativity needs g0_hz > 0")
        else:
            cfg = cfg.with_cooperativity(C)
    return cfg


def load_analysis(path) -> dict:
    r = _Reader(path, _KEYS)
    n_bins = r.float("analysis", "n_bins", 6.0)
    if n_bins != int(n_bins) or n_bins < 0:
        r.fail("analysis", "n_bins", "key 'n_bins' in [analysis] must be a non-negative integer")
    return {"window_T": r.float("analysis", "window_ns", 200.0, positive=True) * 1e-9, "n_bins": int(n_bins)}


def _gain_curve(r: _Reader, sec: str) -> GainCurve:
    if r.has(sec, "gain_table"):
        raw = r.cp[sec]["gain_table"]
        try:
            pairs = [p.split(":") for p in raw.replace("\n", ",").split(",") if p.strip()]
            f = [float(a) for a, _ in pairs]
            g = [float(b) for _, b in pairs]
            return GainCurve.from_db(f, g)
        except ValueError as exc:
            r.fail(sec, "gain_table", f"key 'gain_table' in [{sec}] must be 'hz:db, hz:db, ...' ({exc})")
    return GainCurve.from_db([0.0], [r.float(sec, "gain_db", 0.0)])


def load_detection_chain(path) -> DetectionChain:
    r = _Reader(path, _CHAIN_KEYS)
    for sec in ("microwave", "optical"):
        r.require_section(sec)
    signs = {}
    for sec, default in (("microwave", -1), ("optical", 1)):
        s = r.float(sec, "lo_sign", float(default))
        if s not in (-1.0, 1.0):
            r.fail(sec, "lo_sign", f"key 'lo_sign' in [{sec}] must be +1 or -1")
        signs[sec] = int(s)
    try:
        return DetectionChain(
            n_add_e=r.float("microwave", "n_add"), n_add_o=r.float("optical", "n_add"),
            gain_e=_gain_curve(r, "microwave"), gain_o=_gain_curve(r, "optical"),
            omega_if=r.float("chain", "if_hz", 40e6, positive=True) * TWO_PI,
            lo_sign_e=signs["microwave"], lo_sign_o=signs["optical"],
            n_add_e_sigma=r.float("microwave", "n_add_sigma", 0.0),
            n_add_o_sigma=r.float("optical", "n_add_sigma", 0.0))
    except ConfigError:
        raise
    except ValueError as exc:
        r.fail("microwave", "n_add", str(exc))
