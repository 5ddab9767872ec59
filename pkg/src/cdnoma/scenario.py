"""Experiment configuration: array, user groups, angle-delay profiles.

A scenario is a JSON document. Only ``antennas`` and ``groups`` (each with
at least one MPC carrying ``delay`` and ``sector``) are required::

    {
      "antennas": 100,
      "total_delays": 32,              # L, default max(delay) + 1
      "subcarriers": 64,               # N, power of two, multiple of code_length
      "noma_mode": "MUSA",             # "SCMA" | "MUSA" | "ZF"
      "code_length": 4,                # N_c
      "alphabet_size": 4,
      "symbols_per_frame": 500,        # N_s NOMA symbols per user per frame
      "eb_over_n0_db": [0, 10, 20],
      "trials": 10,
      "seed": 0,
      "users_per_group": 6,            # default for groups without "users"
      "rf_chains": 8,                  # total D, split equally when a group
                                       # does not give "rf_chains"
      "groups": [
        {"users": 6, "rf_chains": 2, "channel_gain": 3.0,
         "mpcs": [{"delay": 0, "sector": [-1.25, 1.5],
                   "angular_spread": 3.0, "gain_fraction": 0.3333}]}
      ]
    }

Noise power per antenna is fixed to one. Energies are derived from the
per-user bit energy, see :func:`group_energies`.
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

NOMA_MODES = ("SCMA", "MUSA", "ZF")
DEFAULT_ANGULAR_SPREAD = 3.0
NOISE_POWER = 1.0


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class MpcProfile:
    delay: int
    sector: tuple[float, float]
    angular_spread: float = DEFAULT_ANGULAR_SPREAD
    gain_fraction: float = 1.0
    angular_profile: str = "uniform"


@dataclass(frozen=True)
class GroupConfig:
    users: int
    rf_chains: int
    mpcs: tuple[MpcProfile, ...]
    channel_gain: float = 1.0

    @property
    def delays(self):
        return np.array([p.delay for p in self.mpcs], dtype=int)


@dataclass(frozen=True)
class ScenarioConfig:
    antennas: int
    groups: tuple[GroupConfig, ...]
    total_delays: int
    subcarriers: int = 64
    noma_mode: str = "MUSA"
    code_length: int = 4
    alphabet_size: int = 4
    symbols_per_frame: int = 500
    eb_over_n0_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    trials: int = 10
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def total_rf_chains(self):
        return sum(g.rf_chains for g in self.groups)

    @property
    def users(self):
        return [g.users for g in self.groups]

    def replace(self, **changes):
        """Return a validated copy with ``changes`` applied."""
        new = dataclasses.replace(self, **changes)
        validate(new)
        return new

    def with_group_layout(self, users=None, rf_chains=None):
        """Copy with every group resized to ``users`` users and the total
        ``rf_chains`` split equally across groups."""
        G = len(self.groups)
        if rf_chains is not None and rf_chains % G:
            raise ScenarioError("rf_chains", f"{rf_chains} not divisible by {G} groups")
        groups = tuple(
            dataclasses.replace(
                g,
                users=g.users if users is None else users,
                rf_chains=g.rf_chains if rf_chains is None else rf_chains // G,
            )
            for g in self.groups
        )
        return self.replace(groups=groups)


def _require(d, key, path):
    if key not in d:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _as_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ScenarioError(path, f"expected integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ScenarioError(path, f"expected number, got {value!r}")
    return float(value)


def _parse_mpc(d, path, n_mpcs):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected object")
    sector = _require(d, "sector", path)
    if not isinstance(sector, (list, tuple)) or len(sector) != 2:
        raise ScenarioError(f"{path}.sector", "expected [low, high]")
    lo = _as_float(sector[0], f"{path}.sector[0]")
    hi = _as_float(sector[1], f"{path}.sector[1]")
    frac = d.get("gain_fraction")
    return MpcProfile(
        delay=_as_int(_require(d, "delay", path), f"{path}.delay", minimum=0),
        sector=(lo, hi),
        angular_spread=_as_float(d.get("angular_spread", DEFAULT_ANGULAR_SPREAD), f"{path}.angular_spread"),
        gain_fraction=1.0 / n_mpcs if frac is None else _as_float(frac, f"{path}.gain_fraction"),
        angular_profile=d.get("angular_profile", "uniform"),
    )


def scenario_from_dict(d):
    """Build and validate a :class:`ScenarioConfig` from parsed JSON."""
    if not isinstance(d, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    raw_groups = _require(d, "groups", "")
    if not isinstance(raw_groups, list) or not raw_groups:
        raise ScenarioError("groups", "expected a non-empty list")
    G = len(raw_groups)
    default_users = d.get("users_per_group")
    total_rf = d.get("rf_chains")

    groups = []
    for gi, gd in enumerate(raw_groups):
        path = f"groups[{gi}]"
        if not isinstance(gd, dict):
            raise ScenarioError(path, "expected object")
        raw_mpcs = _require(gd, "mpcs", path)
        if not isinstance(raw_mpcs, list) or not raw_mpcs:
            raise ScenarioError(f"{path}.mpcs", "at least one MPC is required")
        mpcs = tuple(_parse_mpc(m, f"{path}.mpcs[{i}]", len(raw_mpcs)) for i, m in enumerate(raw_mpcs))

        users = gd.get("users", default_users)
        if users is None:
            raise ScenarioError(f"{path}.users", "missing and no users_per_group default")
        rf = gd.get("rf_chains")
        if rf is None:
            if total_rf is None:
                raise ScenarioError(f"{path}.rf_chains", "missing and no total rf_chains default")
            rf = _as_int(total_rf, "rf_chains", minimum=1) // G
        gain = gd.get("channel_gain")
        groups.append(
            GroupConfig(
                users=_as_int(users, f"{path}.users"),
                rf_chains=_as_int(rf, f"{path}.rf_chains"),
                mpcs=mpcs,
                channel_gain=float(len(mpcs)) if gain is None else _as_float(gain, f"{path}.channel_gain"),
            )
        )

    max_delay = max(p.delay for g in groups for p in g.mpcs)
    L = _as_int(d.get("total_delays", max_delay + 1), "total_delays", minimum=1)
    code_length = _as_int(d.get("code_length", 4), "code_length", minimum=1)
    n_default = max(64, 1 << max(L - 1, 0).bit_length(), code_length)
    known = {
        "antennas", "groups", "total_delays", "subcarriers", "noma_mode", "code_length",
        "alphabet_size", "symbols_per_frame", "eb_over_n0_db", "trials", "seed",
        "users_per_group", "rf_chains",
    }
    eb = d.get("eb_over_n0_db", list(ScenarioConfig.eb_over_n0_db))
    if not isinstance(eb, (list, tuple)) or not eb:
        raise ScenarioError("eb_over_n0_db", "expected a non-empty list")
    cfg = ScenarioConfig(
        antennas=_as_int(_require(d, "antennas", ""), "antennas"),
        groups=tuple(groups),
        total_delays=L,
        subcarriers=_as_int(d.get("subcarriers", n_default), "subcarriers"),
        noma_mode=d.get("noma_mode", "MUSA"),
        code_length=code_length,
        alphabet_size=_as_int(d.get("alphabet_size", 4), "alphabet_size"),
        symbols_per_frame=_as_int(d.get("symbols_per_frame", 500), "symbols_per_frame"),
        eb_over_n0_db=tuple(_as_float(x, f"eb_over_n0_db[{i}]") for i, x in enumerate(eb)),
        trials=_as_int(d.get("trials", 10), "trials"),
        seed=_as_int(d.get("seed", 0), "seed"),
        extra={k: v for k, v in d.items() if k not in known},
    )
    validate(cfg)
    return cfg


def validate(cfg):
    """Check every structural invariant; raises :class:`ScenarioError`."""
    if cfg.antennas < 1:
        raise ScenarioError("antennas", f"must be >= 1, got {cfg.antennas}")
    if not cfg.groups:
        raise ScenarioError("groups", "expected at least one group")
    if cfg.total_delays < 1:
        raise ScenarioError("total_delays", "must be >= 1")
    for gi, g in enumerate(cfg.groups):
        path = f"groups[{gi}]"
        if g.users < 1:
            raise ScenarioError(f"{path}.users", f"must be >= 1, got {g.users}")
        if g.rf_chains < 1:
            raise ScenarioError(f"{path}.rf_chains", f"must be >= 1, got {g.rf_chains}")
        if not g.mpcs:
            raise ScenarioError(f"{path}.mpcs", "at least one MPC is required")
        if not g.channel_gain > 0:
            raise ScenarioError(f"{path}.channel_gain", "must be positive")
        delays = [p.delay for p in g.mpcs]
        if len(set(delays)) != len(delays):
            raise ScenarioError(f"{path}.mpcs", "duplicate delay index")
        for mi, p in enumerate(g.mpcs):
            mp = f"{path}.mpcs[{mi}]"
            if not 0 <= p.delay < cfg.total_delays:
                raise ScenarioError(f"{mp}.delay", f"{p.delay} outside [0, {cfg.total_delays})")
            if not p.angular_spread > 0:
                raise ScenarioError(f"{mp}.angular_spread", "must be positive")
            lo, hi = p.sector
            if lo > hi:
                raise ScenarioError(f"{mp}.sector", f"low {lo} exceeds high {hi}")
            if not (-90 < lo - p.angular_spread / 2 and hi + p.angular_spread / 2 < 90):
                raise ScenarioError(f"{mp}.sector", "angular support must stay inside (-90, 90)")
            if not p.gain_fraction >= 0:
                raise ScenarioError(f"{mp}.gain_fraction", "must be non-negative")
            if p.angular_profile != "uniform":
                raise ScenarioError(f"{mp}.angular_profile", "only 'uniform' is implemented")
        total = sum(p.gain_fraction for p in g.mpcs)
        if not math.isclose(total, 1.0, rel_tol=1e-6, abs_tol=1e-9):
            raise ScenarioError(f"{path}.mpcs", f"gain fractions sum to {total}, expected 1")
    D = cfg.total_rf_chains
    if D > cfg.antennas:
        raise ScenarioError("rf_chains", f"total RF chains {D} exceed antennas {cfg.antennas}")
    N = cfg.subcarriers
    if N < 1 or N & (N - 1):
        raise ScenarioError("subcarriers", f"{N} is not a power of two")
    if N < cfg.total_delays:
        raise ScenarioError("subcarriers", f"{N} shorter than channel memory {cfg.total_delays}")
    if cfg.code_length < 1 or N % cfg.code_length:
        raise ScenarioError("code_length", f"{cfg.code_length} does not divide subcarriers {N}")
    if cfg.noma_mode not in NOMA_MODES:
        raise ScenarioError("noma_mode", f"expected one of {NOMA_MODES}, got {cfg.noma_mode!r}")
    if cfg.alphabet_size < 2 or cfg.alphabet_size & (cfg.alphabet_size - 1):
        raise ScenarioError("alphabet_size", "must be a power of two >= 2")
    if cfg.symbols_per_frame < 1:
        raise ScenarioError("symbols_per_frame", "must be >= 1")
    if cfg.trials < 1:
        raise ScenarioError("trials", "must be >= 1")
    if not cfg.eb_over_n0_db:
        raise ScenarioError("eb_over_n0_db", "expected a non-empty list")


def scenario_to_dict(cfg):
    """Fully explicit JSON-ready form; ``scenario_from_dict`` inverts it."""
    d = {
        "antennas": cfg.antennas,
        "total_delays": cfg.total_delays,
        "subcarriers": cfg.subcarriers,
        "noma_mode": cfg.noma_mode,
        "code_length": cfg.code_length,
        "alphabet_size": cfg.alphabet_size,
        "symbols_per_frame": cfg.symbols_per_frame,
        "eb_over_n0_db": list(cfg.eb_over_n0_db),
        "trials": cfg.trials,
        "seed": cfg.seed,
        "groups": [
            {
                "users": g.users,
                "rf_chains": g.rf_chains,
                "channel_gain": g.channel_gain,
                "mpcs": [
                    {
                        "delay": p.delay,
                        "sector": list(p.sector),
                        "angular_spread": p.angular_spread,
                        "gain_fraction": p.gain_fraction,
                        "angular_profile": p.angular_profile,
                    }
                    for p in g.mpcs
                ],
            }
            for g in cfg.groups
        ],
    }
    d.update(cfg.extra)
    return d


def load_scenario(path):
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"{path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(d)


def dump_scenario(cfg, path):
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


def default_scenario():
    """The bundled four-group, eight-MPC mm-wave layout (M=100, L=32)."""
    text = resources.files("cdnoma").joinpath("data/table1.json").read_text()
    return scenario_from_dict(json.loads(text))


def config_hash(cfg):
    """Short stable digest of the explicit scenario contents."""
    blob = json.dumps(scenario_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def draw_user_angles(cfg, rng):
    """Mean AoA (degrees) of every user at every MPC of its group.

    Returns a list with one ``(K_g, n_mpc)`` array per group; each entry is
    uniform over the MPC's sector.
    """
    out = []
    for g in cfg.groups:
        lo = np.array([p.sector[0] for p in g.mpcs])
        hi = np.array([p.sector[1] for p in g.mpcs])
        u = rng.random((g.users, len(g.mpcs)))
        out.append(lo + u * (hi - lo))
    return out


def group_energies(cfg, eb_db, code_length=None):
    """Energy per signaling interval ``E_s^(g)`` of every group.

    With unit noise power each user spends ``E_b log2(M) / N_c`` per chip,
    so a NOMA symbol carrying ``log2 M`` bits uses ``E_b`` per bit.
    """
    n_c = cfg.code_length if code_length is None else code_length
    per_user = 10.0 ** (eb_db / 10.0) * math.log2(cfg.alphabet_size) / n_c
    return np.array([g.users * per_user for g in cfg.groups])
