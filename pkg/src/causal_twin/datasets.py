"""Bundled datasets, schemas and constraint sets.

``lucas``: the 12-variable LUCAS lung-cancer network, sampled from its
published conditional probability tables.

``osmi``: a synthetic stand-in for the OSMI *Mental Health in Tech* survey
(23 columns, same level sets). The public survey file cannot be bundled;
:func:`clean_osmi_survey` converts the raw Kaggle export into the same
schema so the real data can be dropped in.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .graph import BackgroundKnowledge, MixedGraph
from .tabular import CATEGORICAL, NUMERIC, ColumnSpec, Dataset, ingest_csv

DATA_DIR = Path(str(resources.files("causal_twin") / "data"))

# --------------------------------------------------------------------------
# LUCAS
# --------------------------------------------------------------------------

LUCAS_NODES = (
    "Smoking", "Yellow_Fingers", "Anxiety", "Peer_Pressure", "Genetics",
    "Attention_Disorder", "Born_an_Even_Day", "Car_Accident", "Fatigue",
    "Allergy", "Coughing", "Lung_cancer",
)

LUCAS_EDGES = (
    ("Anxiety", "Smoking"),
    ("Peer_Pressure", "Smoking"),
    ("Smoking", "Yellow_Fingers"),
    ("Smoking", "Lung_cancer"),
    ("Genetics", "Lung_cancer"),
    ("Genetics", "Attention_Disorder"),
    ("Lung_cancer", "Coughing"),
    ("Allergy", "Coughing"),
    ("Lung_cancer", "Fatigue"),
    ("Coughing", "Fatigue"),
    ("Attention_Disorder", "Car_Accident"),
    ("Fatigue", "Car_Accident"),
)

# P(node = 1 | parents), parents in the listed order, rows indexed by the
# parent configuration read as binary digits (first parent most significant).
LUCAS_CPT = {
    "Anxiety": ((), (0.64277,)),
    "Peer_Pressure": ((), (0.32997,)),
    "Genetics": ((), (0.15953,)),
    "Allergy": ((), (0.32842,)),
    "Born_an_Even_Day": ((), (0.5,)),
    "Smoking": (("Peer_Pressure", "Anxiety"), (0.43118, 0.8686, 0.74591, 0.91576)),
    "Yellow_Fingers": (("Smoking",), (0.23119, 0.95372)),
    "Lung_cancer": (("Genetics", "Smoking"), (0.23146, 0.83934, 0.86996, 0.99351)),
    "Attention_Disorder": (("Genetics",), (0.28956, 0.68706)),
    "Coughing": (("Allergy", "Lung_cancer"), (0.1347, 0.7664, 0.64592, 0.99947)),
    "Fatigue": (("Lung_cancer", "Coughing"), (0.35212, 0.80016, 0.56514, 0.89589)),
    "Car_Accident": (("Attention_Disorder", "Fatigue"), (0.2274, 0.78861, 0.779, 0.97169)),
}

LUCAS_TARGET = "Lung_cancer"


def lucas_schema() -> list[ColumnSpec]:
    return [ColumnSpec(n, CATEGORICAL, ("0", "1")) for n in LUCAS_NODES]


def lucas_graph() -> MixedGraph:
    return MixedGraph(LUCAS_NODES, frozenset(LUCAS_EDGES))


def simulate_lucas(n: int = 2000, seed: int = 0) -> Dataset:
    """Draw ``n`` rows from the LUCAS network."""
    rng = np.random.default_rng(seed)
    order = ["Anxiety", "Peer_Pressure", "Genetics", "Allergy", "Born_an_Even_Day", "Smoking",
             "Yellow_Fingers", "Lung_cancer", "Attention_Disorder", "Coughing", "Fatigue",
             "Car_Accident"]
    cols: dict[str, np.ndarray] = {}
    for node in order:
        parents, table = LUCAS_CPT[node]
        row = np.zeros(n, dtype=int)
        for p in parents:
            row = row * 2 + cols[p]
        prob = np.asarray(table)[row]
        cols[node] = (rng.random(n) < prob).astype(int)
    values = np.column_stack([cols[n] for n in LUCAS_NODES]).astype(float)
    return Dataset(tuple(lucas_schema()), values)


def load_lucas() -> Dataset:
    return ingest_csv(DATA_DIR / "lucas.csv", lucas_schema())


# --------------------------------------------------------------------------
# OSMI
# --------------------------------------------------------------------------

YN = ("No", "Yes")
YN_DK = ("No", "Don't know", "Yes")

OSMI_LEVELS: dict[str, tuple[str, ...]] = {
    "Gender": ("Male", "Female", "Other"),
    "self_employed": YN,
    "family_history": YN,
    "treatment": YN,
    "work_interfere": ("No answer", "Never", "Rarely", "Sometimes", "Often"),
    "no_employees": ("1-5", "6-25", "26-100", "100-500", "500-1000", "More than 1000"),
    "remote_work": YN,
    "tech_company": YN,
    "benefits": YN_DK,
    "care_options": ("No", "Not sure", "Yes"),
    "wellness_program": YN_DK,
    "seek_help": YN_DK,
    "anonymity": YN_DK,
    "leave": ("Very difficult", "Somewhat difficult", "Don't know", "Somewhat easy", "Very easy"),
    "mental_health_consequence": ("No", "Maybe", "Yes"),
    "phys_health_consequence": ("No", "Maybe", "Yes"),
    "coworkers": ("No", "Some of them", "Yes"),
    "supervisor": ("No", "Some of them", "Yes"),
    "mental_health_interview": ("No", "Maybe", "Yes"),
    "phys_health_interview": ("No", "Maybe", "Yes"),
    "mental_vs_physical": YN_DK,
    "obs_consequence": YN,
}

OSMI_COLUMNS = (
    "Age", "Gender", "self_employed", "family_history", "treatment", "work_interfere",
    "no_employees", "remote_work", "tech_company", "benefits", "care_options",
    "wellness_program", "seek_help", "anonymity", "leave", "mental_health_consequence",
    "phys_health_consequence", "coworkers", "supervisor", "mental_health_interview",
    "phys_health_interview", "mental_vs_physical", "obs_consequence",
)

OSMI_TARGET = "treatment"
OSMI_AGE_RANGE = (18.0, 72.0)
OSMI_MISSING_POLICY = {"work_interfere": "No answer"}
# seed of the bundled stand-in draw (data/osmi.csv)
OSMI_STANDIN_SEED = 4


def osmi_schema() -> list[ColumnSpec]:
    cols = []
    for name in OSMI_COLUMNS:
        if name == "Age":
            cols.append(ColumnSpec("Age", NUMERIC, normalization=OSMI_AGE_RANGE))
        else:
            cols.append(ColumnSpec(name, CATEGORICAL, OSMI_LEVELS[name]))
    return cols


def osmi_constraints(variant: str = "full") -> BackgroundKnowledge:
    """Domain constraints for OSMI discovery.

    ``full``: Age, Gender, self_employed, family_history exogenous and
    treatment a sink. ``partial``: only Age and Gender exogenous. ``none``:
    nothing. ``anti_causal``: only the implausible edge treatment -> benefits.
    """
    if variant == "full":
        return BackgroundKnowledge(frozenset({"Age", "Gender", "self_employed", "family_history"}),
                                   frozenset({"treatment"}))
    if variant == "partial":
        return BackgroundKnowledge(frozenset({"Age", "Gender"}))
    if variant == "none":
        return BackgroundKnowledge()
    if variant == "anti_causal":
        return BackgroundKnowledge(required=frozenset({("treatment", "benefits")}))
    raise ValueError(f"unknown constraint variant {variant!r}")


def load_osmi(path: str | Path | None = None) -> Dataset:
    """Load OSMI in the bundled schema; defaults to the bundled stand-in."""
    path = Path(path) if path is not None else DATA_DIR / "osmi.csv"
    return ingest_csv(path, osmi_schema(), OSMI_MISSING_POLICY)


def _softmax_draw(rng: np.random.Generator, logits: np.ndarray) -> np.ndarray:
    logits = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((len(p), 1))
    return (u > np.cumsum(p, axis=1)).sum(axis=1).clip(0, p.shape[1] - 1)


def _categorical(rng, n, probs):
    return rng.choice(len(probs), size=n, p=np.asarray(probs) / np.sum(probs))


def simulate_osmi(n: int = 1259, seed: int = 0) -> Dataset:
    """Synthetic respondents with the survey's level sets and rough marginals.

    Each node draws from a softmax over per-level scores that are additive in
    one-hot parent indicators, which is deliberately richer than the linear
    mechanisms a fitted twin uses.
    """
    rng = np.random.default_rng(seed)
    c: dict[str, np.ndarray] = {}

    sizes = {name: len(levels) for name, levels in OSMI_LEVELS.items()}
    sizes["_old"] = 2

    def onehot(name: str) -> np.ndarray:
        return np.eye(sizes[name])[c[name]]

    def node(name: str, base, effects: dict) -> None:
        k = sizes[name]
        logits = np.tile(np.asarray(base, dtype=float), (n, 1))
        for parent, table in effects.items():
            logits += onehot(parent) @ np.asarray(table, dtype=float).reshape(-1, k)
        c[name] = _softmax_draw(rng, logits)

    # roots
    comp = _categorical(rng, n, [0.55, 0.35, 0.10])
    age = np.where(comp == 0, rng.normal(29.0, 3.5, n),
                   np.where(comp == 1, rng.normal(36.0, 5.0, n), rng.normal(46.0, 7.0, n)))
    age = np.clip(np.round(age), *OSMI_AGE_RANGE)
    c["Gender"] = _categorical(rng, n, [0.79, 0.195, 0.015])
    c["self_employed"] = _categorical(rng, n, [0.885, 0.115])
    c["family_history"] = _categorical(rng, n, [0.61, 0.39])
    old = (age > 38).astype(int)
    c["_old"] = old

    node("no_employees", [0.6, 1.2, 1.3, 0.9, 0.0, 1.3],
         {"self_employed": [[0, 0, 0, 0, 0, 0], [2.6, 0.6, -1.5, -2.0, -2.0, -2.5]]})
    node("remote_work", [0.0, -0.9], {"self_employed": [[0, 0], [0, 2.0]]})
    node("tech_company", [0.0, 1.6], {"no_employees": [[0, 0.3], [0, 0.4], [0, 0.2],
                                                      [0, -0.2], [0, -0.4], [0, -0.6]]})
    node("wellness_program", [0.0, -0.9, -1.2], {"self_employed": [[0, 0, 0], [0, -1.2, -1.2]]})
    node("mental_vs_physical", [0.0, 0.55, 0.0], {})
    node("obs_consequence", [0.0, -1.75], {})
    node("phys_health_consequence", [0.0, -1.2, -2.7], {})
    node("phys_health_interview", [0.0, 0.1, -0.9], {})
    node("benefits", [0.0, 0.1, 0.0],
         {"wellness_program": [[0, 0, 0], [-0.3, 1.2, 0.2], [-0.5, 0.0, 1.9]],
          "_old": [[0, 0, 0], [0, -0.8, 1.0]]})
    node("seek_help", [0.0, -0.6, -1.9],
         {"wellness_program": [[0, 0, 0], [0, 1.1, 0.6], [0, 0.6, 2.3]],
          "self_employed": [[0, 0, 0], [0, -0.8, -0.5]]})
    node("anonymity", [0.0, 2.6, 1.6],
         {"mental_vs_physical": [[0, 0, 0], [0, 1.0, -0.5], [0, -0.8, 1.6]]})
    node("leave", [-0.3, 0.0, 1.2, 0.6, 0.3],
         {"mental_vs_physical": [[0.5, 0.6, -0.4, -0.2, -0.6], [0, 0, 0.4, 0, 0],
                                 [-0.9, -0.5, -0.3, 0.4, 0.9]]})
    node("mental_health_consequence", [0.0, 0.0, -0.6],
         {"obs_consequence": [[0, 0, 0], [0, 0.8, 2.0]],
          "phys_health_consequence": [[0, 0, 0], [0, 0.9, 0.9], [0, 0.8, 2.0]]})
    node("care_options", [0.0, -0.5, -0.7],
         {"seek_help": [[0, 0, 0], [0, 0.8, 0.3], [0, 0.2, 1.4]],
          "anonymity": [[0, 0, 0], [0, 0.6, 0.5], [0, -0.2, 1.4]]})
    node("coworkers", [0.0, 1.3, 0.1],
         {"mental_health_consequence": [[0, 0, 0], [0, 0.0, -0.6], [0, -0.9, -2.0]],
          "phys_health_interview": [[0, 0, 0], [0, 0.5, 0.4], [0, 0.3, 1.5]],
          "leave": [[0, 0, 0], [0, 0.3, 0.5], [0, 0.3, 0.3], [0, 0.6, 0.8], [0, 0.6, 1.3]]})
    node("supervisor", [0.0, -0.3, 0.0],
         {"coworkers": [[0.9, -0.6, -0.8], [0, 0.8, 0.2], [-0.6, 0.0, 1.5]]})
    node("mental_health_interview", [0.0, -1.9, -3.6],
         {"phys_health_interview": [[0, 0, 0], [0, 1.0, 0.5], [0, 0.7, 1.8]]})
    node("work_interfere", [0.2, 0.0, -0.35, 0.15, -1.15],
         {"family_history": [[0, 0, 0, 0, 0], [-0.6, -0.4, 0.1, 0.6, 0.9]],
          "Gender": [[0, 0, 0, 0, 0], [0, -0.3, 0.0, 0.4, 0.5], [0, 0, 0.2, 0.6, 0.8]]})
    # work_interfere acts linearly on the treatment logit, as the twin assumes
    node("treatment", [0.0, -0.3],
         {"work_interfere": [[0, -2.8], [0, -1.4], [0, 0.0], [0, 1.4], [0, 2.8]],
          "family_history": [[0, 0], [0, 0.8]],
          "Gender": [[0, 0], [0, 0.8], [0, 0.8]],
          "care_options": [[0, -0.5], [0, -0.3], [0, 0.55]],
          "benefits": [[0, -0.7], [0, -0.45], [0, 0.7]],
          "coworkers": [[0, -0.7], [0, 0.0], [0, 0.55]]})

    schema = osmi_schema()
    cols = []
    for spec in schema:
        if spec.name == "Age":
            lo, hi = OSMI_AGE_RANGE
            cols.append((age - lo) / (hi - lo))
        else:
            cols.append(c[spec.name].astype(float))
    return Dataset(tuple(schema), np.column_stack(cols))


_GENDER_MAP = {
    "female": "Female", "f": "Female", "woman": "Female", "femake": "Female", "femail": "Female",
    "female ": "Female", "cis female": "Female", "cis-female/femme": "Female",
    "female (cis)": "Female", "cis woman": "Female",
    "male": "Male", "m": "Male", "man": "Male", "make": "Male", "mail": "Male", "maile": "Male",
    "mal": "Male", "msle": "Male", "malr": "Male", "male ": "Male", "cis male": "Male",
    "cis man": "Male", "male (cis)": "Male", "mail ": "Male",
}


def clean_osmi_survey(raw_csv: str | Path, out_csv: str | Path) -> int:
    """Convert the raw 2014 survey export to the bundled schema.

    Free-text gender is folded into Female/Male/Other, ages outside 18..72 are
    dropped, a blank self_employed becomes "No" and a blank work_interfere is
    kept blank (the missing policy maps it to "No answer"). Returns the number
    of rows written.
    """
    with open(raw_csv, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.DictReader(fh))
    written = 0
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OSMI_COLUMNS)
        for r in rows:
            try:
                age = float(r["Age"])
            except (TypeError, ValueError):
                continue
            if not OSMI_AGE_RANGE[0] <= age <= OSMI_AGE_RANGE[1]:
                continue
            out = []
            for name in OSMI_COLUMNS:
                v = (r.get(name) or "").strip()
                if name == "Age":
                    v = format(age, "g")
                elif name == "Gender":
                    v = _GENDER_MAP.get(v.lower(), "Other")
                elif name == "self_employed" and v in ("", "NA"):
                    v = "No"
                elif name == "work_interfere" and v == "NA":
                    v = ""
                elif name in ("mental_vs_physical", "benefits", "wellness_program",
                              "seek_help", "anonymity") and v.lower() == "don't know":
                    v = "Don't know"
                elif name == "leave" and v.lower() == "don't know":
                    v = "Don't know"
                out.append(v)
            w.writerow(out)
            written += 1
    return written


def bundled_path(name: str) -> Path:
    return DATA_DIR / name
