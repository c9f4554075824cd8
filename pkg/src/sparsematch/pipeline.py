"""End-to-end stages: learn a dictionary, encode pairs, train and evaluate.

Every stage reads its inputs from and writes its artifacts to ``config.out``
and stamps them with ``config.hash()`` so that later stages can refuse
artifacts produced under a different configuration.

Cross-subset protocol: test pairs are encoded with the dictionary learnt on
the training subset and scored by the model trained on that subset.
"""

import logging
import os
import time

import numpy as np

from . import coding, dictionary, evaluation, network, patchdata
from .errors import ConfigError
from .graph import knn_graph
from .spectral import embed

log = logging.getLogger(__name__)

DICT_FILE = "dictionary.spmd"
MODEL_FILE = "model.spmn"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.txt"
ROC_CSV = "roc.csv"
ROC_DAT = "roc.dat"


def codes_file(split):
    return f"{split}_codes.spmc"


def pairs_file(split):
    return f"{split}_pairs.csv"


def _balanced_pick(labels, n, rng, exclude=None):
    """``n`` pair indices, half of each label, drawn without replacement."""
    pool = np.arange(len(labels))
    if exclude is not None:
        pool = np.setdiff1d(pool, exclude)
    n_pos = n // 2
    picks = []
    for label, count in ((1, n_pos), (0, n - n_pos)):
        members = pool[labels[pool] == label]
        if len(members) < count:
            raise ConfigError(f"only {len(members)} pairs with label {label} "
                              f"available, {count} requested")
        picks.append(rng.choice(members, count, replace=False))
    return np.sort(np.concatenate(picks))


def _synth_source(config):
    total = config.n_train_pairs + config.n_test_pairs
    if config.dict_disjoint:
        # spare pairs whose patches only the dictionary sample may use
        total += -(-config.n_dict_samples // 2)
    per_proto = -(-total // config.synth_prototypes)
    per_proto += (config.synth_prototypes * per_proto) % 2
    return patchdata.synth_dataset(
        config.stage_seed("synth"), config.synth_prototypes, per_proto,
        config.synth_side, config.synth_noise, config.synth_shift)


def load_split(config, split):
    """Patch dataset whose pair list is the requested ``train``/``test`` split."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be train or test, got {split!r}")
    n = config.n_train_pairs if split == "train" else config.n_test_pairs
    if config.data == "synth":
        ds = _synth_source(config)
        rng = np.random.default_rng(config.stage_seed("split"))
        labels = ds.pairs[:, 2]
        train = _balanced_pick(labels, config.n_train_pairs, rng)
        if split == "train":
            chosen = train
        else:
            chosen = _balanced_pick(labels, n, rng, exclude=train)
    else:
        directory = config.train_dir if split == "train" else config.test_dir
        matches = config.train_matches if split == "train" else config.test_matches
        ds = patchdata.load_ubc_subset(directory, matches, config.patch_side,
                                       config.grid)
        rng = np.random.default_rng(config.stage_seed(f"pairs-{split}"))
        chosen = _balanced_pick(ds.pairs[:, 2], n, rng)
    if config.standardize:
        ds.patches = patchdata.standardize(ds.patches)
    return ds.subset_pairs(chosen)


def _meta(config, **extra):
    meta = {"config_hash": config.hash(), "seed": config.seed}
    meta.update(extra)
    return meta


def check_hash(meta, config, what, force=False):
    found = meta.get("config_hash")
    if found != config.hash() and not force:
        raise ConfigError(f"{what} was produced with config hash {found}, "
                          f"current config is {config.hash()}; rerun the stage "
                          "or pass --force")


def dictionary_pool(config, train):
    """Indices of the training-source patches the dictionary may sample."""
    pool = np.arange(len(train.patches))
    if config.data == "synth":
        # both splits index one patch array; keep test patches out of the basis
        pool = np.setdiff1d(pool, load_split(config, "test").pairs[:, :2])
    if config.dict_disjoint:
        pool = np.setdiff1d(pool, train.pairs[:, :2])
    return pool


def cmd_learn_dict(config):
    """Sample patches, build graph and embedding, ridge-fit and save the basis."""
    os.makedirs(config.out, exist_ok=True)
    start = time.perf_counter()
    ds = load_split(config, "train")
    rng = np.random.default_rng(config.stage_seed("learn-dict"))
    pool = dictionary_pool(config, ds)
    if len(pool) < config.n_dict_samples:
        raise ConfigError(f"only {len(pool)} patches available for "
                          f"{config.n_dict_samples} dictionary samples")
    sample = np.sort(rng.choice(pool, config.n_dict_samples, replace=False))
    x = ds.patches[sample].T
    m, n = x.shape
    if n <= config.k:
        raise ConfigError(f"dictionary learning needs n > k (n={n}, k={config.k})")
    if config.require_overcomplete and config.k <= m:
        raise ConfigError(f"over-complete mode needs k > m (k={config.k}, m={m})")
    graph = knn_graph(x, config.p, config.bandwidth, config.squared_distance)
    emb = embed(graph, config.k, config.eigen_mode, config.drop_trivial)
    meta = _meta(config, dataset=ds.name, p=config.p, t=repr(graph.t),
                 mode=config.eigen_mode, n=n)
    d = dictionary.fit_dictionary(x, emb, config.alpha,
                                  unit_norm=config.unit_norm_atoms, meta=meta)
    dictionary.save_dictionary(d, config.path(DICT_FILE))
    log.info("dictionary %dx%d (%s) learnt from %d patches in %.2fs",
             d.m, d.k, d.completeness, n, time.perf_counter() - start)
    return d


def cmd_encode(config, split="train", dict_path=None, force=False):
    """Encode every patch referenced by the split's pairs with the dictionary."""
    os.makedirs(config.out, exist_ok=True)
    d = dictionary.load_dictionary(dict_path or config.path(DICT_FILE))
    check_hash(d.meta, config, "dictionary", force)
    ds = load_split(config, split)
    if ds.m != d.m:
        raise ConfigError(f"dictionary dimension m={d.m} does not match "
                          f"{split} patches of dimension {ds.m}")
    used, inverse = np.unique(ds.pairs[:, :2], return_inverse=True)
    codes, report = coding.encode_batch(d, ds.patches[used].T, config.beta)
    pairs = np.column_stack([inverse.reshape(-1, 2), ds.pairs[:, 2]])
    coding.save_codes(codes, config.path(codes_file(split)), config.beta,
                      meta=_meta(config, split=split, dict_k=d.k), k=d.k)
    patchdata.save_pairs_csv(pairs, config.path(pairs_file(split)))
    log.info("encoded %d %s patches: mean support %.2f, mean residual %.4f, "
             "%.2fs", report.n, split, report.mean_support_size,
             report.mean_reconstruction_error, report.wall_time)
    return codes, pairs, report


def load_samples(config, split, force=False):
    codes, _, meta = coding.load_codes(config.path(codes_file(split)))
    check_hash(meta, config, f"{split} codes", force)
    pairs = patchdata.load_pairs_csv(config.path(pairs_file(split)))
    if len(pairs) and pairs[:, :2].max() >= len(codes):
        raise ConfigError(f"{split} pair list refers past the {len(codes)} codes")
    if not codes:
        raise ConfigError(f"{split} code file is empty")
    return network.PairSamples.from_codes(codes, pairs)


def train_config(config):
    return network.TrainConfig(
        batch_size=config.batch_size, epochs=config.epochs, lr=config.lr,
        beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
        val_split=config.val_split, seed=config.stage_seed("train"))


def cmd_train(config, force=False):
    samples = load_samples(config, "train", force)
    arch = network.architecture(config.arch, config.hidden_sizes,
                                config.activation)
    cfg = train_config(config)
    params, history = network.train(samples, arch, cfg)
    network.save_model(params, config.path(MODEL_FILE), cfg,
                       meta=_meta(config, k=samples.k))
    history.to_csv(config.path(HISTORY_FILE))
    if len(history):
        log.info("trained %d epochs, best val acc %.4f at epoch %d",
                 len(history), max(history.val_acc), history.best_epoch + 1)
    return params, history


def cmd_eval(config, force=False):
    """Score the test split; writes metrics, ROC csv and gnuplot data."""
    params, _, model_meta = network.load_model(config.path(MODEL_FILE))
    check_hash(model_meta, config, "model", force)
    d = dictionary.load_dictionary(config.path(DICT_FILE))
    check_hash(d.meta, config, "dictionary", force)
    if params.input_dim != 2 * d.k:
        raise ConfigError(f"model expects codes of length "
                          f"{params.input_dim // 2} but dictionary has k={d.k}")
    samples = load_samples(config, "test", force)
    if samples.k != d.k:
        raise ConfigError(f"test codes have k={samples.k}, dictionary k={d.k}")
    curve, err95, acc = evaluation.evaluate_model(params, samples)
    evaluation.write_metrics(config.path(METRICS_FILE), err95, acc,
                             curve.n_pos, curve.n_neg,
                             extra={"k": d.k, "config_hash": config.hash()})
    evaluation.write_roc_csv(curve, config.path(ROC_CSV))
    evaluation.write_roc_dat(curve, config.path(ROC_DAT))
    log.info("error@95 %.4f, accuracy %.4f on %d test pairs", err95, acc,
             len(samples))
    return curve, err95, acc


def cmd_pipeline(config):
    start = time.perf_counter()
    os.makedirs(config.out, exist_ok=True)
    with open(config.path("config.txt"), "w") as fh:
        fh.write(config.to_text())
    d = cmd_learn_dict(config)
    cmd_encode(config, "train")
    cmd_encode(config, "test")
    _, history = cmd_train(config)
    curve, err95, acc = cmd_eval(config)
    log.info("pipeline finished in %.1fs", time.perf_counter() - start)
    return {"error95": err95, "accuracy": acc, "k": d.k, "m": d.m,
            "completeness": d.completeness, "history": history}


def cmd_synth(config, path=None):
    """Write the synthetic source dataset as a patch container plus pair CSV."""
    os.makedirs(config.out, exist_ok=True)
    ds = _synth_source(config)
    path = path or config.path("synth.spmp")
    pairs_path = patchdata.save_dataset(ds, path)
    return ds, path, pairs_path
