"""Reference values for the bundled fixtures, computed without the library.

Evaluates the pooled estimator, the cross-site deviation, window means, probe
statistics and flow totals directly from the fixture files with plain Python
arithmetic. The Rust tests freeze the numbers this prints.

    python3 fixtures/scripts/oracle.py
"""
import csv
import json
import math
import os
from datetime import date, datetime, timedelta

FIX = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_csv(name):
    with open(os.path.join(FIX, name)) as f:
        return list(csv.DictReader(f))


def estimator():
    with open(os.path.join(FIX, "site_analytics.json")) as f:
        entries = json.load(f)
    with open(os.path.join(FIX, "international_sites.txt")) as f:
        excluded = {l.strip() for l in f if l.strip()}
    entries = [e for e in entries if e["site"] not in excluded]
    countries = sorted({c for e in entries for c in e["shares"] if c != "ZZ"}) + ["ZZ"]
    rows = []
    for e in entries:
        row = {c: 0.0 for c in countries}
        for c, v in e["shares"].items():
            row[c] += v
        row["ZZ"] += 1.0 - sum(e["shares"].values())
        assert row["ZZ"] >= -1e-9, e["site"]
        rows.append(row)
    vols = [float(e["monthly_visits"]) for e in entries]
    total = sum(vols)
    out = {}
    for c in countries:
        p = sum(r[c] * a for r, a in zip(rows, vols)) / total
        var = sum((a / total) * (r[c] - p) ** 2 for r, a in zip(rows, vols))
        out[c] = {"p_hat": p, "stdev": math.sqrt(var), "binomial_stderr": math.sqrt(p * (1 - p) / total)}
    return {"sites": len(entries), "total_visits": total, "countries": out}


def daily(name):
    peaks = {}
    for r in load_csv(name):
        d = r["timestamp"][:10]
        peaks[d] = max(peaks.get(d, -math.inf), float(r["value"]))
    return peaks


def window(name, event=date(2022, 2, 24), pre=14, post=14):
    s = daily(name)
    pre_v = [s[str(event - timedelta(days=k))] for k in range(1, pre + 1) if str(event - timedelta(days=k)) in s]
    post_v = [s[str(event + timedelta(days=k))] for k in range(post) if str(event + timedelta(days=k)) in s]
    pm, qm = sum(pre_v) / len(pre_v), sum(post_v) / len(post_v)
    return {"pre_mean": pm, "post_mean": qm, "percent_change": 100 * (qm - pm) / pm,
            "pre_count": len(pre_v), "post_count": len(post_v)}


def probes():
    counts = {}
    for r in load_csv("probes.csv"):
        counts.setdefault(r["date"], 0)
        counts[r["date"]] += r["connected"] == "1"
    year = [v for d, v in counts.items() if "2021-02-23" <= d <= "2022-02-22"]
    post = [v for d, v in counts.items() if "2022-02-24" <= d <= "2022-03-09"]
    return {"on_2022_02_23": counts["2022-02-23"], "year_mean": sum(year) / len(year),
            "year_days": len(year), "post_min": min(post), "true_flags": sum(counts.values())}


def flows():
    per_day = {}
    for r in load_csv("flows.csv"):
        per_day[r["date"]] = per_day.get(r["date"], 0) + int(r["individuals"])
    return {"total": sum(per_day.values()), "days": len(per_day)}


def pearson_flows_maps():
    per_day = {}
    for r in load_csv("flows.csv"):
        per_day[r["date"]] = per_day.get(r["date"], 0) + int(r["individuals"])
    maps = daily("ua_google_maps.csv")
    common = sorted(set(per_day) & set(maps))
    x = [per_day[d] for d in common]
    y = [maps[d] for d in common]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return {"r": sxy / math.sqrt(sxx * syy), "n": len(common)}


M64 = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return state, z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M64


class Xoshiro256pp:
    JUMP = [0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C]

    def __init__(self, seed):
        st, self.s = seed, []
        for _ in range(4):
            st, out = splitmix64(st)
            self.s.append(out)

    def next(self):
        s = self.s
        result = (rotl((s[0] + s[3]) & M64, 23) + s[0]) & M64
        t = (s[1] << 17) & M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def jump(self):
        acc = [0, 0, 0, 0]
        for word in self.JUMP:
            for b in range(64):
                if word & (1 << b):
                    acc = [a ^ x for a, x in zip(acc, self.s)]
                self.next()
        self.s = acc


def site_stream(seed, site):
    rng = Xoshiro256pp(seed)
    for _ in range(site):
        rng.jump()
    return rng


def sample_counts(probs, n, rng):
    cum, acc = [], 0.0
    for p in probs:
        acc += p
        cum.append(acc)
    fallback = max(i for i, p in enumerate(probs) if p > 0)
    counts = [0] * len(probs)
    for _ in range(n):
        u = (rng.next() >> 11) * (1.0 / (1 << 53))
        idx = next((i for i, c in enumerate(cum) if u < c), fallback)
        counts[idx] += 1
    return counts


def generator_vectors():
    return {
        "seed_42_site_0": first_outputs(42, 0),
        "seed_42_site_3": first_outputs(42, 3),
        "counts_seed_7_site_2": sample_counts([0.5, 0.3, 0.2], 1000, site_stream(7, 2)),
    }


def first_outputs(seed, site, n=3):
    rng = site_stream(seed, site)
    return [rng.next() for _ in range(n)]


if __name__ == "__main__":
    print(json.dumps({
        "estimator": estimator(),
        "ua_cloudflare": window("ua_cloudflare.csv"),
        "ua_google_search": window("ua_google_search.csv"),
        "pl_cloudflare": window("pl_cloudflare.csv"),
        "probes": probes(),
        "flows": flows(),
        "flows_vs_maps_lag0": pearson_flows_maps(),
        "generator": generator_vectors(),
    }, indent=1))
