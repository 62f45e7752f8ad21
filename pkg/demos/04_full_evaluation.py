"""The full evaluation loop as a library call.

Synthesizes two sessions of two runs each, evaluates three decoders in
both prediction modes with the session-accumulative protocol, and prints
the aggregate tables (medians, spreads, and pairwise geometric-mean
ratios). The same flow is available from the shell:

    cpdecode synth --out runs --sessions 2 --runs 2
    cpdecode evaluate --input runs --model ar,bayes_iso,bayes_ard \
        --mode velocity,acceleration --session-accumulative --out results
    cpdecode report results --out summary
"""

from cpdecode import (
    ModelSpec,
    RunData,
    SynthConfig,
    aggregate,
    session_accumulative,
    synth_generate,
)

sessions = []
for s in (1, 2):
    runs = []
    for r in (1, 2):
        cfg = SynthConfig(seed=100 * s + r, n_packets=800, noise_std=0.3)
        packets, labels, _ = synth_generate(cfg)
        runs.append(RunData(packets=packets, labels=labels, session=s, run=r))
    sessions.append(runs)

reports = []
for kind in ("ar", "bayes_iso", "bayes_ard"):
    for mode in ("velocity", "acceleration"):
        reports.extend(session_accumulative(sessions, ModelSpec(kind=kind), mode))

tables = aggregate(reports)
print("== summary (per model x mode) ==")
print(tables["summary"].to_string(index=False))
print("\n== pairwise geometric-mean ratios ==")
print(tables["ratios"].to_string(index=False))
