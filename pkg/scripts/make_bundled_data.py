"""Regenerate the data files shipped inside the package."""

from causal_twin.datasets import (DATA_DIR, OSMI_MISSING_POLICY, OSMI_STANDIN_SEED, lucas_graph, lucas_schema,
                                  osmi_constraints, osmi_schema, simulate_lucas, simulate_osmi)
from causal_twin.graph import BackgroundKnowledge
from causal_twin.tabular import save_schema


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    simulate_lucas(2000, 0).to_csv(DATA_DIR / "lucas.csv")
    save_schema(DATA_DIR / "lucas_schema.json", lucas_schema())
    lucas_graph().save(DATA_DIR / "lucas_graph.json")
    BackgroundKnowledge().save(DATA_DIR / "lucas_constraints.json")
    simulate_osmi(1259, OSMI_STANDIN_SEED).to_csv(DATA_DIR / "osmi.csv")
    save_schema(DATA_DIR / "osmi_schema.json", osmi_schema(), OSMI_MISSING_POLICY)
    for variant in ("full", "partial", "none", "anti_causal"):
        osmi_constraints(variant).save(DATA_DIR / f"osmi_constraints_{variant}.json")
    print(f"wrote bundled data to {DATA_DIR}")


if __name__ == "__main__":
    main()
