import numpy as np
import pytest

from gcnphr.cli import main
from gcnphr.data_io import Checkpoint, Vocabulary, load_checkpoint, save_checkpoint
from gcnphr.model import ModelConfig, ModelParams, init_params, param_shapes, rank_scores, score_candidates


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out-dir", str(d), "--n-users", "12", "--n-videos", "80", "--n-hashtags", "16",
                 "--seed", "2"]) == 0
    return d


def _train_args(d, out, *extra):
    return ["train", "--interactions", d / "interactions.tsv", "--features", d / "features.tsv", "--out", out,
            "--dim", "8", "--epochs", "3", "--lr", "0.1", "--seed", "5", *extra]


def test_synth_writes_three_files(synth_dir):
    assert {p.name for p in synth_dir.iterdir()} == {"interactions.tsv", "features.tsv", "planted.tsv"}


@pytest.mark.parametrize("argv", [
    ["train", "--features", "f", "--out", "o"],
    ["train", "--interactions", "i", "--features", "f", "--out", "o", "--variant", "bogus"],
    ["eval", "--model", "m", "--interactions", "i", "--features", "f", "--k", "0"],
    ["recommend", "--model", "m", "--user", "u"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_errors_exit_1_with_one_line(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--model", tmp_path / "missing", "--interactions", "x", "--features", "y")
    assert code == 1 and err.count("\n") == 1 and err.startswith("error: FileNotFoundError:")


def test_train_is_deterministic_and_eval_repeatable(synth_dir, tmp_path, capsys):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    code, log, _ = run(capsys, *_train_args(synth_dir, a))
    assert code == 0 and log.splitlines()[0].startswith("epoch\t") and len(log.splitlines()) == 5
    assert run(capsys, *_train_args(synth_dir, b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ev = ["eval", "--model", a, "--interactions", synth_dir / "interactions.tsv",
          "--features", synth_dir / "features.tsv", "--seed", "1"]
    first, second = run(capsys, *ev)[1], run(capsys, *ev, "--threads", "3")[1]
    assert first == second and len(first.splitlines()) == 6
    code, three, _ = run(capsys, *ev, "--k", "5")
    assert [ln.split("\t")[:2] for ln in three.splitlines()] == [["precision", "5"], ["recall", "5"],
                                                                  ["accuracy", "5"]]


def test_zero_epochs_stores_initialisation(synth_dir, tmp_path, capsys):
    out = tmp_path / "z.ckpt"
    assert run(capsys, *_train_args(synth_dir, out)[:-6], "--epochs", "0", "--seed", "5")[0] == 0
    ck = load_checkpoint(out)
    init = init_params(ck.config, len(ck.users), len(ck.hashtags),
                       np.random.default_rng(np.random.SeedSequence(5).spawn(2)[0]), 0.1)
    assert ck.params.equal(init) and ck.metadata["best_epoch"] == 0


def test_config_file_supplies_defaults(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\ndim = 4\nepochs=0\nfusion=sum\n")
    base = ["--config", cfg, "train", "--interactions", synth_dir / "interactions.tsv",
            "--features", synth_dir / "features.tsv"]
    assert run(capsys, *base, "--out", tmp_path / "m")[0] == 0
    assert load_checkpoint(tmp_path / "m").config.dim == 4
    assert run(capsys, *base, "--out", tmp_path / "n", "--dim", "6")[0] == 0
    ck = load_checkpoint(tmp_path / "n")
    assert ck.config.dim == 6 and ck.config.fusion.value == "sum"
    cfg.write_text("nonsense=1\n")
    with pytest.raises(SystemExit):
        main([str(a) for a in base] + ["--out", str(tmp_path / "o")])


def test_recommend_matches_library(synth_dir, tmp_path, capsys):
    m = tmp_path / "m.ckpt"
    run(capsys, *_train_args(synth_dir, m))
    ck = load_checkpoint(m)
    feats = synth_dir / "features.tsv"
    code, out, _ = run(capsys, "recommend", "--model", m, "--features", feats, "--user", "u3", "--video", "v7",
                       "--topk", "4")
    assert code == 0
    lines = [ln.split("\t") for ln in out.splitlines()]
    from gcnphr.data_io import parse_features
    row = parse_features(feats).row("v7")
    scores = score_candidates(ck.params, ck.config, ck.user_reprs[ck.users.index("u3")], row, ck.hashtag_reprs)
    expect = rank_scores(scores, np.arange(len(ck.hashtags)), 4)
    assert [(h, float(s)) for h, s in lines] == [(ck.hashtags[h], s) for h, s in expect]
    row_text = ",".join(repr(float(x)) for x in row)
    code, same, _ = run(capsys, "recommend", "--model", m, "--user", "u3", "--feature-row", row_text, "--topk", "1")
    assert code == 0 and same.splitlines() == out.splitlines()[:1]
    code, _, err = run(capsys, "recommend", "--model", m, "--user", "nobody", "--feature-row", row_text)
    assert code == 1 and "unknown user 'nobody'" in err
    code, _, err = run(capsys, "recommend", "--model", m, "--user", "u3", "--feature-row", "1,2")
    assert code == 1


def test_eval_rejects_vocabulary_mismatch(synth_dir, tmp_path, capsys):
    m = tmp_path / "m.ckpt"
    run(capsys, *_train_args(synth_dir, m)[:-6], "--epochs", "0")
    other = tmp_path / "i.tsv"
    other.write_text((synth_dir / "interactions.tsv").read_text() + "stranger\tv0\th0\n")
    code, _, err = run(capsys, "eval", "--model", m, "--interactions", other, "--features",
                       synth_dir / "features.tsv")
    assert code == 1 and "VocabularyMismatch" in err


def test_oracle_checkpoint_gives_closed_form_metrics(tmp_path, capsys):
    # one-hot features name each video's hashtag; W_v = W_h = I and identity hashtag vectors
    # make score(h | video) the feature entry, so every ground-truth tag ranks first
    n_h = 6
    lines, feats = [], ["dim=%d" % n_h]
    for n in range(60):
        u, h = n % 5, (n * 7) % n_h
        lines.append(f"u{u}\tv{n}\th{h}")
        feats.append(f"v{n}\t" + ",".join("1.0" if k == h else "0.0" for k in range(n_h)))
    (tmp_path / "i.tsv").write_text("\n".join(lines) + "\n")
    (tmp_path / "f.tsv").write_text("\n".join(feats) + "\n")
    cfg = ModelConfig(dim=n_h, d_v=n_h)
    users = Vocabulary(f"u{u}" for u in range(5))
    videos = Vocabulary(f"v{n}" for n in range(60))
    tags = Vocabulary(dict.fromkeys(f"h{(n * 7) % n_h}" for n in range(60)))
    blocks = {k: np.zeros(s) for k, s in param_shapes(cfg, 5, n_h).items()}
    blocks["W_v"] = np.eye(n_h)
    blocks["W_h"] = np.eye(n_h)
    # hashtag vector j must be the unit vector of the hashtag named in the feature column
    H = np.zeros((n_h, n_h))
    for j, name in enumerate(tags.ids):
        H[j, int(name[1:])] = 1.0
    save_checkpoint(tmp_path / "m", Checkpoint(ModelParams(blocks), cfg, users, videos, tags, np.zeros((5, n_h)), H,
                                               {"split_seed": 0, "split_ratios": [0.8, 0.1, 0.1]}))
    code, out, _ = run(capsys, "eval", "--model", tmp_path / "m", "--interactions", tmp_path / "i.tsv",
                       "--features", tmp_path / "f.tsv", "--k", "1,5")
    assert code == 0
    got = {(m, int(k)): float(v) for m, k, v in (ln.split("\t") for ln in out.splitlines())}
    assert got == pytest.approx({("precision", 1): 1.0, ("precision", 5): 0.2, ("recall", 1): 1.0, ("recall", 5): 1.0,
                   ("accuracy", 1): 1.0, ("accuracy", 5): 1.0}, abs=1e-15)


def test_gradcheck_command(capsys):
    code, out, _ = run(capsys, "gradcheck", "--variant", "no-user-on-hashtag", "--fusion", "sum")
    assert code == 0 and float(out.split("\t")[1]) < 1e-4
    code, _, _ = run(capsys, "gradcheck", "--eps", "0.5")
    assert code == 1


@pytest.mark.slow
def test_end_to_end_beats_random(synth_dir, tmp_path, capsys):
    m = tmp_path / "m.ckpt"
    args = _train_args(synth_dir, m)
    args[args.index("--epochs") + 1] = "150"
    args[args.index("--lr") + 1] = "0.3"
    assert run(capsys, *args)[0] == 0
    _, out, _ = run(capsys, "eval", "--model", m, "--interactions", synth_dir / "interactions.tsv",
                    "--features", synth_dir / "features.tsv", "--k", "5")
    recall = float(out.splitlines()[1].split("\t")[2])
    assert recall > 2 * 5 / 16
