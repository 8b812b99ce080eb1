import json

import pytest

from halluspan.datamodel import DetectionConfig, Record, SampleSet, parse_record
from halluspan.errors import TuningError
from halluspan.evaluator import evaluate
from halluspan.pipeline import detect
from halluspan.scorer import StubEmbeddingProvider
from halluspan.tuner import GridSpec, config_line, grid_search, load_config_file, objective_value, render_leaderboard

from conftest import planted_records


def fixture():
    recs, samples = planted_records()
    records = [parse_record(json.dumps(r)) for r in recs]
    return records, {k: SampleSet(tuple(v)) for k, v in samples.items()}


def oracle_ranking(records, samples, grid, base=None):
    """Re-run detect + evaluate independently for every grid point."""
    base = base or DetectionConfig()
    prov = StubEmbeddingProvider()
    rows = []
    for order, cfg in enumerate(grid.configs(base)):
        preds = [detect(r, samples[r.id], cfg, prov) for r in records]
        obj, _, _ = objective_value(evaluate(preds, records), grid)
        rows.append((-obj, cfg.window_size, cfg.stride, -cfg.score_threshold, order, cfg, obj))
    rows.sort(key=lambda r: r[:5])
    return [(r[5], r[6]) for r in rows]


def test_singleton_grid():
    records, samples = fixture()
    grid = GridSpec((5,), (3,), (0.5,), (3,), (0.3,))
    (res,) = grid_search(records, samples, grid, StubEmbeddingProvider())
    assert (res.config.window_size, res.config.stride, res.config.score_threshold) == (5, 3, 0.5)
    assert [(res.config, res.objective)] == oracle_ranking(records, samples, grid)


def test_grid_skips_invalid_pairs():
    cfgs = GridSpec((2, 3), (1, 3), (0.5,), (3,), (0.3,)).configs(DetectionConfig())
    assert [(c.window_size, c.stride) for c in cfgs] == [(2, 1), (3, 1), (3, 3)]


def test_perfect_config_ranked_first():
    # one record with gold everywhere: lambda 0.4 marks the whole unsupported answer,
    # lambda 1.0 marks nothing (scores never exceed 1)
    text = "Pennard Castle sits above the dunes"
    rec = Record("en", text, hard_labels=((0, len(text)),), id="x")
    samples = {"x": SampleSet(("I do not know.",) * 20)}
    grid = GridSpec((3,), (1,), (1.0, 0.4), (1,), (0.3,))
    ranked = grid_search([rec], samples, grid, StubEmbeddingProvider())
    assert ranked[0].config.score_threshold == 0.4 and ranked[0].objective == 1.0
    assert ranked[1].objective == 0.0


def test_two_by_two_matches_oracle():
    records, samples = fixture()
    grid = GridSpec((4, 5), (2, 3), (0.5,), (3,), (0.3,))
    ranked = grid_search(records, samples, grid, StubEmbeddingProvider())
    assert [(r.config, r.objective) for r in ranked] == oracle_ranking(records, samples, grid)


def test_parallel_equals_serial():
    records, samples = fixture()
    grid = GridSpec((4, 5), (2, 3), (0.4, 0.6), (2, 3), (0.3,), objective="mix")
    serial = grid_search(records, samples, grid, StubEmbeddingProvider())
    parallel = grid_search(records, samples, grid, StubEmbeddingProvider(), jobs=4)
    assert [(r.config, r.objective) for r in serial] == [(r.config, r.objective) for r in parallel]


def test_top_config_objective_reproducible():
    records, samples = fixture()
    grid = GridSpec((4, 5), (2, 3), (0.4, 0.5, 0.6), (2, 3), (0.2, 0.3))
    top = grid_search(records, samples, grid, StubEmbeddingProvider())[0]
    prov = StubEmbeddingProvider()
    preds = [detect(r, samples[r.id], top.config, prov) for r in records]
    assert objective_value(evaluate(preds, records), grid)[0] == top.objective


def test_weights_are_opt_in():
    assert len(GridSpec((4,), (2,), (0.5,), (3,), (0.3,)).configs(DetectionConfig())) == 1
    grid = GridSpec((4,), (2,), (0.5,), (3,), (0.3,), weights=((0.4, 0.4, 0.2), (0.5, 0.3, 0.2), (0.5, 0.5, 0.5)))
    # the last triple does not sum to 1 and is skipped
    assert len(grid.configs(DetectionConfig())) == 2


def test_errors():
    records, samples = fixture()
    with pytest.raises(TuningError, match="no valid"):
        grid_search(records, samples, GridSpec((2,), (3,)), StubEmbeddingProvider())
    unlabeled = [Record("en", "a b c", id="u", labeled=False)]
    with pytest.raises(TuningError, match="'u'"):
        grid_search(unlabeled, {"u": SampleSet(("a",))}, GridSpec(), StubEmbeddingProvider())
    with pytest.raises(TuningError, match="samples"):
        grid_search(records, {}, GridSpec(), StubEmbeddingProvider())


def test_config_file_round_trip(tmp_path):
    cfg = DetectionConfig(window_size=6, stride=2, score_threshold=0.7)
    path = tmp_path / "c.jsonl"
    path.write_text(config_line("en", cfg, "tuned:en", 0.5) + "\n" + config_line("ca", cfg, "approximated from tuned:es") + "\n")
    loaded = load_config_file(path)
    assert loaded == {"en": cfg, "ca": cfg}
    board = render_leaderboard({"ca": (cfg, "approximated from tuned:es")})
    assert "approximated from tuned:es" in board and board.splitlines()[0].startswith("Language")
