"""FastAPI application exposing scenarios, rule checking, window
classification and the deterministic experiment runner."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query

from .. import __version__
from ..core import ConfigError, StateConfig
from ..harness import (
    ExperimentResult,
    get_preset,
    results_csv,
    run_experiment,
    run_matrix,
    trace_csv,
    UNSET,
)
from ..rules import RuleError, format_action, format_condition, parse_rules, pretty_print
from ..scenarios import SCENARIO_NAMES, UnknownScenarioError, gen_scenario
from ..states import WindowLengthError, classify_categorical, classify_numerical
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    ExperimentMetrics,
    ExperimentRequest,
    ExperimentResponse,
    HealthResponse,
    MatrixRequest,
    MatrixResponse,
    RuleCheckRequest,
    RuleCheckResponse,
    RuleSummary,
    ScenarioDetail,
)


def _metrics(result: ExperimentResult) -> ExperimentMetrics:
    return ExperimentMetrics(
        scenario=result.scenario,
        mode=result.mode,
        seed=result.seed,
        rmse_follower=result.rmse_follower,
        rmse_leader=result.rmse_leader,
        msgs_per_sec=result.msgs_per_sec,
        spike_pct=result.spike_pct,
        report_count=result.report_count,
        duration=result.duration,
        final_interval=result.final_interval,
    )


def _sensitivity_arg(request) -> object:
    # distinguish "omitted" (preset default) from an explicit null (disable)
    if "sensitivity" in request.model_fields_set:
        return request.sensitivity
    return UNSET


def create_app() -> FastAPI:
    app = FastAPI(
        title="peermon",
        version=__version__,
        description=(
            "Self-adaptive peer-to-peer monitoring: scenario generators, the "
            "adaptation-rule checker, window classification, and the "
            "deterministic adaptive-vs-static benchmark runner."
        ),
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/scenarios", response_model=list)
    def scenarios() -> list:
        return list(SCENARIO_NAMES)

    @app.get("/scenarios/{name}", response_model=ScenarioDetail)
    def scenario_detail(
        name: str,
        seed: int = Query(default=0),
        include_values: bool = Query(default=False),
    ) -> ScenarioDetail:
        try:
            sc = gen_scenario(name, seed)
        except UnknownScenarioError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return ScenarioDetail(
            name=sc.name,
            seed=sc.seed,
            duration=sc.duration,
            spike_segments=list(sc.spike_segments),
            values=list(sc.values) if include_values else None,
        )

    @app.post("/rules/check", response_model=RuleCheckResponse)
    def check_rules(request: RuleCheckRequest) -> RuleCheckResponse:
        try:
            ruleset = parse_rules(request.text)
        except RuleError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        summaries = [
            RuleSummary(
                name=rule.name,
                salience=rule.salience,
                conditions=[format_condition(c) for c in rule.conditions],
                actions=[format_action(a) for a in rule.actions],
            )
            for rule in ruleset.rules
        ]
        return RuleCheckResponse(rules=summaries, canonical=pretty_print(ruleset))

    @app.post("/classify", response_model=ClassifyResponse)
    def classify(request: ClassifyRequest) -> ClassifyResponse:
        params = request.config
        try:
            cfg = StateConfig(
                k=params.k, p=params.p, delta_max=params.delta_max,
                too_low=params.too_low, low=params.low,
                high=params.high, too_high=params.too_high,
            )
            if request.kind == "categorical":
                states = classify_categorical(request.window, cfg)
            else:
                values = [float(v) for v in request.window]
                states = classify_numerical(values, cfg)
        except (ConfigError, WindowLengthError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return ClassifyResponse(states=sorted(s.value for s in states))

    @app.post("/experiments", response_model=ExperimentResponse)
    def experiment(request: ExperimentRequest) -> ExperimentResponse:
        try:
            preset = get_preset(request.preset)
            scenario = gen_scenario(request.scenario, request.seed)
            rules = (
                parse_rules(request.rules_text)
                if request.rules_text is not None
                else None
            )
            result = run_experiment(
                scenario,
                request.mode,
                preset,
                rules=rules,
                sensitivity=_sensitivity_arg(request),
            )
        except (ConfigError, UnknownScenarioError, RuleError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        response = ExperimentResponse(
            **_metrics(result).model_dump(), csv=results_csv([result])
        )
        if request.include_traces:
            response.trace_csv = trace_csv(result)
            response.samples = result.samples
            response.reports = result.reports
            response.intervals = result.intervals
        return response

    @app.post("/experiments/matrix", response_model=MatrixResponse)
    def matrix(request: MatrixRequest) -> MatrixResponse:
        try:
            preset = get_preset(request.preset)
            results = run_matrix(
                request.seeds,
                preset,
                sensitivity=_sensitivity_arg(request),
                scenarios=request.scenarios,
                modes=request.modes,
            )
        except (ConfigError, UnknownScenarioError, RuleError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return MatrixResponse(
            results=[_metrics(r) for r in results], csv=results_csv(results)
        )

    return app


app = create_app()
