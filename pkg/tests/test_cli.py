import csv
import io
import json

import numpy as np
import pytest

from crested import cli
from crested import serialization as ser
from crested.chain_core import ReversibleChain, uniform_chain
from crested.corpus import random_reversible_chain
from crested.first_crested import CrestedSpec
from crested.insect import TreeShape, insect_kernel
from crested.second_crested import SecondCrestedSpec
from crested.spectral_oracle import make_rng


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spectrum_ehrenfest(capsys):
    code, out, _ = run(capsys, "spectrum", "--preset", "ehrenfest", "--balls", "3", "--urns", "2")
    assert code == 0
    assert [int(r["dimension"]) for r in rows(out)] == [1, 3, 3, 1]


def test_spectrum_insect(capsys):
    code, out, _ = run(capsys, "spectrum", "--preset", "insect", "--shape", "2,2")
    got = [(float(r["eigenvalue"]), int(r["dimension"])) for r in rows(out)]
    assert code == 0
    assert np.allclose([v for v, _ in got], [1, 2 / 3, 0], atol=1e-15)
    assert [d for _, d in got] == [1, 1, 2]


def test_spectrum_second_spec_file(capsys, tmp_path):
    Q = insect_kernel(TreeShape((2, 2)))
    path = tmp_path / "second.json"
    ser.save(SecondCrestedSpec(5, 2, Q, 0.3), path)
    code, out, _ = run(capsys, "spectrum", "--spec", str(path))
    table = rows(out)
    assert code == 0
    assert list(table[0]) == ["a", "k", "eigenvalue", "dimension"]
    assert sum(int(r["dimension"]) for r in table) == 160


def test_spectrum_merge_and_json(capsys):
    code, out, _ = run(capsys, "spectrum", "--preset", "bi-insect", "--n", "5", "--shape", "2,2",
                       "--p0", "0.5", "--merge", "--format", "json")
    recs = json.loads(out)
    assert code == 0
    assert sum(r["dimension"] for r in recs) == 160
    # at p0 = 1/2 two rows share an eigenvalue and are merged
    code, out, _ = run(capsys, "spectrum", "--preset", "bi-insect", "--n", "5", "--shape", "2,2", "--p0", "0.5")
    assert len(recs) < len(rows(out))


def test_verify_corpus_passes(capsys):
    code, out, _ = run(capsys, "verify", "--random-corpus", "100", "--seed", "3")
    assert code == 0
    assert out.strip().endswith("100/100 passed")


def test_verify_reports_failures(capsys, monkeypatch):
    orig = cli._rows_first

    def corrupted(spec, with_basis):
        out = orig(spec, with_basis)
        out[-1].eigenvalue += 1e-3
        return out

    monkeypatch.setattr(cli, "_rows_first", corrupted)
    code, out, _ = run(capsys, "verify", "--preset", "ehrenfest", "--balls", "2", "--urns", "2", "--format", "json")
    assert code == 1
    assert json.loads(out)[0]["passed"] is False


def test_corrupted_weights_exit_2(capsys, tmp_path):
    doc = ser.to_dict(CrestedSpec((uniform_chain(2), uniform_chain(3)), ("C", "N"), [0.5, 0.5]))
    doc["weights"] = [0.5, 0.7]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "verify", "--spec", str(path))
    assert code == 2 and "weights" in err


def test_not_reversible_exit_3(capsys, tmp_path):
    asym = random_reversible_chain(make_rng(1), 3)
    path = tmp_path / "nr.json"
    ser.save(CrestedSpec((uniform_chain(2), asym), ("N", "C"), [0.5, 0.5]), path)
    for cmd in ("spectrum", "verify", "build"):
        code, _, err = run(capsys, cmd, "--spec", str(path))
        assert code == 3 and "witness 1" in err


def test_second_h_equals_n_verifies(capsys, tmp_path):
    path = tmp_path / "hn.json"
    ser.save(SecondCrestedSpec(3, 3, uniform_chain(2), 0.5), path)
    code, out, _ = run(capsys, "verify", "--spec", str(path))
    assert code == 0 and "1/1 passed" in out


def test_kstep(capsys):
    code, out, _ = run(capsys, "kstep", "--preset", "nested-uniform", "--shape", "2,2", "--k", "4", "--x", "0,0")
    assert code == 0
    assert max(float(r["difference"]) for r in rows(out)) < 1e-10
    code, out, _ = run(capsys, "kstep", "--preset", "ehrenfest", "--balls", "2", "--urns", "2",
                       "--k", "0", "--x", "0,1", "--y", "0,1")
    assert abs(float(rows(out)[0]["spectral"]) - 1) < 1e-12
    code, out, _ = run(capsys, "kstep", "--preset", "ehrenfest", "--balls", "2", "--urns", "2",
                       "--k", "1", "--x", "0,1", "--y", "1,1")
    assert abs(float(rows(out)[0]["matrix_power"]) - 0.25) < 1e-15
    code, _, _ = run(capsys, "kstep", "--preset", "ehrenfest", "--balls", "2", "--urns", "2", "--x", "7,7")
    assert code == 2


def test_kstep_second_product(capsys):
    code, out, _ = run(capsys, "kstep", "--preset", "bernoulli-laplace", "--n", "4", "--h", "2", "--urns", "2",
                       "--p0", "0.4", "--k", "3", "--x", "0,1:0,1")
    assert code == 0
    assert max(float(r["difference"]) for r in rows(out)) < 1e-10


def test_simulate_uniform_one_step(capsys, tmp_path):
    path = tmp_path / "j2.json"
    ser.save(uniform_chain(2), path)
    code, out, _ = run(capsys, "simulate", "--spec", str(path), "--steps", "1", "--replicas", "100")
    assert code == 0
    assert float(rows(out)[1]["tv_exact"]) == 0.0


def test_simulate_insect_within_envelope(capsys):
    code, out, _ = run(capsys, "simulate", "--preset", "insect", "--shape", "3,2,2", "--steps", "50",
                       "--replicas", "20000", "--seed", "8")
    assert code == 0
    for r in rows(out):
        assert abs(float(r["tv_empirical"]) - float(r["tv_exact"])) <= float(r["envelope_3sigma"])


def test_simulate_warns_on_swap_chain(capsys, tmp_path):
    path = tmp_path / "swap.json"
    ser.save(ReversibleChain((0, 1), np.array([[0.0, 1.0], [1.0, 0.0]]), np.full(2, 0.5)), path)
    code, _, err = run(capsys, "simulate", "--spec", str(path), "--steps", "4", "--replicas", "10")
    assert code == 0 and "not ergodic" in err


def test_outputs_are_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.csv"
        assert cli.main(["simulate", "--preset", "ehrenfest", "--balls", "3", "--urns", "2",
                         "--steps", "10", "--replicas", "500", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_build_round_trip(capsys, tmp_path):
    path = tmp_path / "built.json"
    code, _, _ = run(capsys, "build", "--preset", "insect", "--shape", "2,2", "--format", "json", "--out", str(path))
    assert code == 0
    c = ser.load(path)
    assert np.array_equal(c.P, insect_kernel(TreeShape((2, 2))).P)


def test_input_errors(capsys):
    assert run(capsys, "spectrum")[0] == 2
    assert run(capsys, "spectrum", "--preset", "ehrenfest", "--balls", "2")[0] == 2
    assert run(capsys, "spectrum", "--preset", "insect", "--shape", "2,x")[0] == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["spectrum", "--bogus"])
    assert e.value.code == 2
