"""Named scenario presets and the flat parameter record they are built from."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .channels import MPH, FsoParams, RfLinkConfig, jakes_rho
from .perf import MODULATIONS, ScenarioSet

__all__ = [
    "TURBULENCE",
    "SystemConfig",
    "Variant",
    "FigurePreset",
    "PRESETS",
    "preset",
    "preset_ids",
    "db_to_linear",
]

# Fitted Gamma-Gamma / pointing-error parameters for two turbulence regimes.
TURBULENCE = {
    "moderate": dict(alpha=5.4181, beta=3.7916, H_l=0.9033, xi=1.6758,
                     Cn2=3e-14, link_km=1.0),
    "strong": dict(alpha=5.0711, beta=1.1547, H_l=0.8159, xi=1.6885,
                   Cn2=1e-13, link_km=2.0),
}


def db_to_linear(v: float) -> float:
    return 10.0 ** (v / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Every scalar parameter of a scenario, in user-facing units.

    Powers and SNRs are in dB (``P_M_dBW`` in dBW), speeds in m/s.  When
    ``d_SR``/``d_SP`` are set they override ``delta2_SR``/``delta2_SP`` through
    ``delta2 = d^-path_loss_exp``.  ``sigma2_innov = 0`` means "use
    ``delta2_SR``".
    """

    J: int = 5
    N_S: int = 3
    N_R: int = 2
    N_P: int = 2
    N_b: int = 50
    N_a: int = 3
    B: int = 4
    T: int = 8
    L: int = 1
    delta2_SR: float = 1.0
    delta2_SP: float = 1.0
    d_SR: float = 0.0
    d_SP: float = 0.0
    path_loss_exp: float = 2.5
    sigma2_eps_SR: float = 0.0
    sigma2_eps_SP: float = 0.0
    sigma2_innov: float = 0.0
    speed_SR: float = 0.0
    speed_SP: float = 0.0
    f_c: float = 5.9e9
    R_s: float = 9500.0
    P_A_dB: float = 20.0
    P_M_dBW: float = 27.0
    eta0: float = 1.0
    gamma_th_dB: float = 3.0
    # FSO hop
    alpha: float = TURBULENCE["moderate"]["alpha"]
    beta: float = TURBULENCE["moderate"]["beta"]
    xi: float = TURBULENCE["moderate"]["xi"]
    H_l: float = TURBULENCE["moderate"]["H_l"]
    theta: int = 1
    mu_dB: float = 20.0
    # primary network (MC only)
    P_U_dBW: float = 20.0
    eta_pri: float = 1.0
    primary_outage_target: float = 1e-3
    constraint: str = "composite"
    interference: str = "per_user"

    def __post_init__(self):
        if self.constraint not in ("composite", "fixed"):
            raise ValueError("constraint must be 'composite' or 'fixed'")
        if self.interference not in ("per_user", "aggregate"):
            raise ValueError("interference must be 'per_user' or 'aggregate'")
        if self.J < 1:
            raise ValueError("J must be >= 1")

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    @property
    def rho_SR(self) -> float:
        return jakes_rho(self.speed_SR, self.f_c, self.R_s)

    @property
    def rho_SP(self) -> float:
        return jakes_rho(self.speed_SP, self.f_c, self.R_s)

    def link(self) -> RfLinkConfig:
        d_sr = self.d_SR ** -self.path_loss_exp if self.d_SR > 0 else self.delta2_SR
        d_sp = self.d_SP ** -self.path_loss_exp if self.d_SP > 0 else self.delta2_SP
        return RfLinkConfig(
            N_S=self.N_S, N_R=self.N_R, N_P=self.N_P,
            delta2_SR=d_sr, delta2_SP=d_sp,
            sigma2_eps_SR=self.sigma2_eps_SR, sigma2_eps_SP=self.sigma2_eps_SP,
            sigma2_innov=self.sigma2_innov if self.sigma2_innov > 0 else None,
            rho_SR=self.rho_SR, rho_SP=self.rho_SP,
            L=self.L, N_b=self.N_b, N_a=self.N_a, B=self.B, T=self.T,
        )

    def fso(self) -> FsoParams:
        return FsoParams(self.alpha, self.beta, self.xi, self.H_l, self.theta,
                         db_to_linear(self.mu_dB))

    def scenario(self) -> ScenarioSet:
        return ScenarioSet(
            links=(self.link(),) * self.J,
            fso=self.fso(),
            P_A=db_to_linear(self.P_A_dB) * self.eta0,
            P_M=db_to_linear(self.P_M_dBW),
            gamma_th=db_to_linear(self.gamma_th_dB),
            eta0=self.eta0,
        )

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Variant:
    """One curve of a preset: a label plus parameter overrides."""

    label: str
    overrides: tuple[tuple[str, object], ...] = ()

    def apply(self, cfg: SystemConfig) -> SystemConfig:
        return cfg.replace(**dict(self.overrides))


@dataclass(frozen=True)
class FigurePreset:
    """A reproducible figure: base parameters, sweep axis and curves."""

    id: str
    title: str
    base: SystemConfig
    sweep_name: str
    sweep_values: tuple[float, ...]
    variants: tuple[Variant, ...] = (Variant("default"),)
    metric: str = "outage"
    modulations: tuple[str, ...] = ()
    methods: tuple[str, ...] = ("closed",)
    notes: str = ""
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.metric not in ("outage", "ber", "primary_outage"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.sweep_name not in SystemConfig.field_names():
            raise ValueError(f"sweep axis {self.sweep_name!r} is not a parameter")
        for v in self.variants:
            for key, _ in v.overrides:
                if key not in SystemConfig.field_names():
                    raise ValueError(f"variant {v.label!r} overrides unknown key {key!r}")
        for mod in self.modulations:
            if mod not in MODULATIONS:
                raise ValueError(f"unknown modulation {mod!r}")
        if self.metric == "ber" and not self.modulations:
            raise ValueError("a BER preset needs at least one modulation")

    def config(self, variant: Variant, value: float) -> SystemConfig:
        cfg = variant.apply(self.base)
        kind = type(getattr(cfg, self.sweep_name))
        return cfg.replace(**{self.sweep_name: kind(value)})

    def points(self):
        """Yield ``(variant, sweep value, SystemConfig)`` in output order."""
        for v in self.variants:
            for x in self.sweep_values:
                yield v, x, self.config(v, x)

    def validate(self) -> None:
        for _, _, cfg in self.points():
            cfg.scenario()


def _strong() -> dict:
    t = TURBULENCE["strong"]
    return dict(alpha=t["alpha"], beta=t["beta"], xi=t["xi"], H_l=t["H_l"])


_PA_GRID = tuple(float(v) for v in range(0, 41, 5))
_25, _45 = 25 * MPH, 45 * MPH


def _build() -> dict[str, FigurePreset]:
    base = SystemConfig()
    out = [
        FigurePreset(
            "fig2a", "Outage vs P_A for node mobility, perfect CSI",
            base, "P_A_dB", _PA_GRID,
            (
                Variant("static"),
                Variant("su_25mph", (("speed_SR", _25),)),
                Variant("su_45mph", (("speed_SR", _45),)),
                Variant("pu_45mph", (("speed_SP", _45),)),
            ),
            notes="speed grid of the mobile curves is a documented default",
        ),
        FigurePreset(
            "fig2b", "Outage vs P_A with channel estimation errors",
            base, "P_A_dB", _PA_GRID,
            (
                Variant("su_25mph_eSR_0", (("speed_SR", _25),)),
                Variant("su_25mph_eSR_0.05", (("speed_SR", _25), ("sigma2_eps_SR", 0.05))),
                Variant("su_25mph_eSR_0.1", (("speed_SR", _25), ("sigma2_eps_SR", 0.1))),
                Variant("pu_45mph_eSP_0.05", (("speed_SP", _45), ("sigma2_eps_SP", 0.05))),
                Variant("pu_45mph_eSP_0.1", (("speed_SP", _45), ("sigma2_eps_SP", 0.1))),
            ),
            notes="estimation-error grid is a documented default",
        ),
        FigurePreset(
            "fig3", "Preamble vs midamble, moderate and strong turbulence",
            base.replace(speed_SR=_25), "P_A_dB", _PA_GRID,
            (
                Variant("preamble_moderate", (("L", 1),)),
                Variant("midamble_moderate", (("L", 25),)),
                Variant("preamble_strong", (("L", 1),) + tuple(_strong().items())),
                Variant("midamble_strong", (("L", 25),) + tuple(_strong().items())),
            ),
        ),
        FigurePreset(
            "fig4", "Outage vs SU-relay distance",
            base.replace(J=1, N_R=3, P_A_dB=15.0, d_SP=1.0, d_SR=2.0),
            "d_SR", (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 10.5, 12.0, 15.0),
            (Variant("d_SP_1", (("d_SP", 1.0),)), Variant("d_SP_5", (("d_SP", 5.0),))),
            notes="single SU, static nodes, perfect CSI",
        ),
        FigurePreset(
            "fig5", "Outage vs relay antennas",
            base.replace(speed_SR=17 * MPH, speed_SP=17 * MPH, sigma2_eps_SR=0.1,
                         sigma2_eps_SP=0.1, P_A_dB=10.0),
            "N_R", tuple(float(v) for v in range(2, 9)),
        ),
        FigurePreset(
            "fig6", "BER vs P_A for node mobility",
            base.replace(sigma2_eps_SR=0.05, sigma2_eps_SP=0.05), "P_A_dB", _PA_GRID,
            (
                Variant("static"),
                Variant("pu_45mph", (("speed_SP", _45),)),
                Variant("su_25mph", (("speed_SR", _25),)),
                Variant("su_45mph", (("speed_SR", _45),)),
            ),
            metric="ber", modulations=("BPSK", "DBPSK"),
        ),
        FigurePreset(
            "fig7", "BER vs pointing-error ratio, strong turbulence",
            base.replace(sigma2_eps_SR=0.05, sigma2_eps_SP=0.05, speed_SR=40 * MPH,
                         P_A_dB=20.0, mu_dB=20.0, **_strong()),
            "xi", (0.6, 0.8, 1.0, 1.25, 1.6885, 2.0, 3.0, 5.0),
            metric="ber", modulations=("BPSK",),
        ),
        FigurePreset(
            "fig8", "Primary outage under secondary interference",
            base.replace(P_M_dBW=10.0, P_U_dBW=20.0), "P_A_dB",
            tuple(float(v) for v in range(0, 31, 5)),
            (Variant("composite", (("constraint", "composite"),)),
             Variant("fixed_only", (("constraint", "fixed"),))),
            metric="primary_outage", methods=("mc",),
            notes="primary SINR model and rate target are model choices",
        ),
    ]
    return {p.id: p for p in out}


PRESETS = _build()


def preset_ids() -> list[str]:
    return sorted(PRESETS)


def preset(id: str) -> FigurePreset:
    try:
        return PRESETS[id]
    except KeyError:
        raise KeyError(f"unknown preset {id!r}; valid ids: {', '.join(preset_ids())}") from None
