import json
import math

import numpy as np
import pytest

from aggrisk.datagen import GenSpec, generate_portfolio, generate_yet
from aggrisk.engine import SU, RunConfig, run_analysis
from aggrisk.io import (
    FormatError,
    file_sha256,
    read_portfolio,
    read_xelt,
    read_yet,
    read_ylt,
    write_portfolio,
    write_xelt,
    write_yet,
    write_ylt,
    yet_from_bytes,
    yet_to_bytes,
)
from aggrisk.model import EltTerms, LayerTerms, Portfolio, Layer, Xelt

SPEC = GenSpec.desk(num_trials=200, events_per_trial=(1, 30), catalogue_size=500,
                    events_per_xelt=100, xelts_per_layer=2, layers_per_program=2)


def test_yet_round_trip(tmp_path):
    yet = generate_yet(SPEC)
    size = write_yet(yet, tmp_path / "y.bin")
    assert size == 4 + 2 + 8 + 8 + 200 * 12 + yet.event_ids.size * 20
    back = read_yet(tmp_path / "y.bin")
    assert back == yet
    assert yet_to_bytes(back) == (tmp_path / "y.bin").read_bytes()


def test_yet_errors():
    data = yet_to_bytes(generate_yet(SPEC))
    with pytest.raises(FormatError, match="magic"):
        yet_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="truncated"):
        yet_from_bytes(data[:-5])
    with pytest.raises(FormatError, match="trailing"):
        yet_from_bytes(data + b"\0")
    with pytest.raises(FormatError):
        yet_from_bytes(b"AR")


def test_xelt_round_trip_is_exact(tmp_path):
    x = generate_portfolio(SPEC).programs[0].layers[0].xelts[0]
    write_xelt(x, tmp_path / "x.csv")
    back = read_xelt(tmp_path / "x.csv", x.terms)
    assert back == x
    write_xelt(back, tmp_path / "x2.csv")
    assert file_sha256(tmp_path / "x.csv") == file_sha256(tmp_path / "x2.csv")


def test_xelt_bad_files(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,mean\n1,2\n")
    with pytest.raises(FormatError, match="header"):
        read_xelt(p)
    p.write_text("event_id,mean_loss,sigma_i,sigma_c,max_loss,z_e\n1,2,3\n")
    with pytest.raises(FormatError, match="6 fields"):
        read_xelt(p)
    p.write_text("event_id,mean_loss,sigma_i,sigma_c,max_loss,z_e\n1,20,3,3,10,0.5\n")
    with pytest.raises(FormatError):
        read_xelt(p)


def test_portfolio_round_trip(tmp_path):
    pf = generate_portfolio(SPEC)
    paths = write_portfolio(pf, tmp_path, SPEC.catalogue_size, generator={"seed": 1})
    assert len(paths) == 2 * 2 + 1
    back, doc = read_portfolio(tmp_path / "portfolio.json")
    assert doc["catalogue_size"] == 500 and doc["generator"] == {"seed": 1}
    for pa, pb in zip(pf.programs, back.programs):
        for la, lb in zip(pa.layers, pb.layers):
            assert la.terms == lb.terms and la.xelts == lb.xelts


def test_portfolio_infinite_terms(tmp_path):
    x = Xelt([1], [1.0], [0.0], [0.0], [2.0], [0.5], EltTerms())
    write_portfolio(Portfolio.single(Layer((x,), LayerTerms())), tmp_path, 3)
    back, _ = read_portfolio(tmp_path / "portfolio.json")
    assert math.isinf(back.programs[0].layers[0].terms.agg_limit)


def test_portfolio_errors(tmp_path):
    p = tmp_path / "portfolio.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        read_portfolio(p)
    p.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(FormatError, match="version"):
        read_portfolio(p)
    p.write_text(json.dumps({"format_version": 1, "programs": [{"layers": [{"xelts": []}]}]}))
    with pytest.raises(FormatError):
        read_portfolio(p)


def test_ylt_round_trip(tmp_path):
    yet, pf = generate_yet(SPEC), generate_portfolio(SPEC)
    ylt = run_analysis(pf, yet, RunConfig(mode=SU))
    write_ylt(ylt, tmp_path / "a.csv")
    back = read_ylt(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.trial_id, ylt.trial_id)
    np.testing.assert_allclose(back.loss, ylt.loss, atol=5e-7)
    write_ylt(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_ylt_bad_header(tmp_path):
    p = tmp_path / "y.csv"
    p.write_text("a,b\n")
    with pytest.raises(FormatError):
        read_ylt(p)
