"""Regenerate the bundled fixtures.

All fixtures are synthetic. They are built so that their summary statistics
take chosen target values (probe counts, window changes, rank changes, vendor
shares); they are not copies of real feeds. Output is deterministic.

    python3 fixtures/scripts/generate.py
"""
import json
import math
import os
import random
from datetime import date, datetime, timedelta, timezone

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.dirname(HERE)
EVENT = date(2022, 2, 24)


def days(start, end):
    d = start
    while d <= end:
        yield d
        d += timedelta(days=1)


def write(name, text):
    with open(os.path.join(OUT, name), "w", newline="\n") as f:
        f.write(text)


def fmt(v, places=6):
    s = f"{v:.{places}f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-0") else "0"


# --- site analytics ---------------------------------------------------------

def site_analytics():
    rng = random.Random(2022)
    international = [
        "google.com", "youtube.com", "facebook.com", "yandex.ru", "wikipedia.org",
        "instagram.com", "vk.com", "ok.ru", "mail.ru", "twitter.com",
        "aliexpress.com", "telegram.org", "live.com", "netflix.com", "tiktok.com",
        "bing.com", "zoom.us", "microsoft.com", "apple.com", "amazon.com",
        "linkedin.com", "pinterest.com", "reddit.com", "github.com", "stackoverflow.com",
        "booking.com", "yahoo.com", "twitch.tv", "spotify.com", "whatsapp.com",
        "office.com", "dropbox.com", "imdb.com", "ebay.com", "discord.com",
    ]
    ukrainian = [
        "google.com.ua", "rozetka.com.ua", "privatbank.ua", "olx.ua", "ukr.net",
        "prom.ua", "pravda.com.ua", "sinoptik.ua", "unian.ua", "diia.gov.ua",
        "tsn.ua", "monobank.ua", "novaposhta.ua", "rst.ua", "work.ua",
    ]
    # Mean share of each country among visits to Ukrainian sites.
    base = {
        "PL": 0.021, "DE": 0.030, "US": 0.022, "RU": 0.025, "CZ": 0.009,
        "NL": 0.008, "FR": 0.007, "IT": 0.006, "ES": 0.005, "GB": 0.006,
        "MD": 0.004, "SK": 0.004, "HU": 0.003, "RO": 0.003, "AT": 0.004,
        "CA": 0.004, "IL": 0.003, "LT": 0.002,
    }
    entries = []
    order = list(range(50))
    rng.shuffle(order)
    ua_iter = iter(ukrainian)
    intl_iter = iter(international)
    ua_slots = set(order[:15])
    for rank in range(50):
        visits = int(round(4.5e8 / (rank + 1) ** 0.9, -3))
        if rank in ua_slots:
            site = next(ua_iter)
            shares = {"UA": round(rng.uniform(0.70, 0.86), 4)}
            for c, m in base.items():
                spread = 0.35 if c != "RU" else 0.9
                v = max(0.0, m * (1 + rng.uniform(-spread, spread)))
                shares[c] = round(v, 4)
            if site == "google.com.ua":
                shares["DE"] = 0.0484
            # Keep at least 1% for the rest of the world.
            others = sum(v for c, v in shares.items() if c != "UA")
            shares["UA"] = min(shares["UA"], round(0.99 - others, 4))
        else:
            site = next(intl_iter)
            shares = {"US": round(rng.uniform(0.2, 0.4), 4), "RU": round(rng.uniform(0.0, 0.1), 4),
                      "UA": round(rng.uniform(0.0, 0.05), 4), "DE": round(rng.uniform(0.02, 0.06), 4)}
        entries.append({"site": site, "monthly_visits": visits, "shares": shares})
    write("site_analytics.json", json.dumps(entries, indent=2) + "\n")
    write("international_sites.txt", "\n".join(international) + "\n")


# --- synthetic ground truth --------------------------------------------------

def synth():
    countries = ["UA", "RU", "DE", "PL", "US", "CZ", "IT", "ES", "GB", "FR",
                 "NL", "CA", "MD", "SK", "AT", "HU", "RO", "IL", "LT", "ZZ"]
    p = [0.80, 0.022, 0.031, 0.0203, 0.0225, 0.0095, 0.0061, 0.0052, 0.0058, 0.0071,
         0.0079, 0.0042, 0.0038, 0.0041, 0.0036, 0.0031, 0.0029, 0.0027, 0.0021]
    p.append(round(1.0 - sum(p), 10))
    write("synth.json", json.dumps({"countries": countries, "p_true": p, "seed": 20220224}, indent=2) + "\n")
    weights = [1.0 / (j + 1) ** 0.8 for j in range(15)]
    raw = [1e7 * w / sum(weights) for w in weights]
    vols = [int(v) for v in raw]
    vols[0] += 10_000_000 - sum(vols)
    sites = [{"site": f"site{j + 1:02}.ua", "monthly_visits": v} for j, v in enumerate(vols)]
    write("volumes.json", json.dumps(sites, indent=2) + "\n")


# --- RIPE Atlas probe status -------------------------------------------------

def probes():
    rng = random.Random(183)
    year_start, year_end = date(2021, 2, 23), date(2022, 2, 22)
    gaps = {date(2021, 5, 3), date(2021, 8, 16), date(2021, 10, 11), date(2021, 12, 24), date(2022, 1, 19)}
    year_days = [d for d in days(year_start, year_end) if d not in gaps]
    assert len(year_days) == 360
    counts = {d: rng.randint(216, 224) for d in year_days}
    target = 79164  # 219.9 * 360
    while sum(counts.values()) != target:
        d = rng.choice(year_days)
        step = 1 if sum(counts.values()) < target else -1
        if 215 <= counts[d] + step <= 225:
            counts[d] += step
    counts[date(2022, 2, 23)] = 222
    decline = [218, 212, 205, 199, 194, 190, 187, 185, 184, 183, 183, 184, 183, 185]
    for i, c in enumerate(decline):
        counts[EVENT + timedelta(days=i)] = c
    for d in days(EVENT + timedelta(days=len(decline)), date(2022, 3, 31)):
        counts[d] = rng.randint(183, 186)
    lines = ["probe_id,date,connected"]
    population = list(range(1001, 1241))
    for d in sorted(counts):
        connected = set(rng.sample(population, counts[d]))
        for pid in population:
            if pid in connected:
                lines.append(f"{pid},{d},1")
            elif pid % 40 == 0:
                lines.append(f"{pid},{d},0")
    write("probes.csv", "\n".join(lines) + "\n")


# --- traffic series ----------------------------------------------------------

def level(d, pre, post, recover_to, recover_days=45):
    """Daily level: flat before the event, step to `post` for two weeks,
    then a linear return towards `recover_to`."""
    k = (d - EVENT).days
    if k < 0:
        return pre
    if k < 14:
        return post
    frac = min(1.0, (k - 14) / recover_days)
    return post + (recover_to - post) * frac


def traffic_daily(name, pre, post, recover_to, seed):
    rng = random.Random(seed)
    lines = ["timestamp,value"]
    for d in days(date(2022, 1, 25), date(2022, 4, 25)):
        v = level(d, pre, post, recover_to) * (1 + rng.uniform(-0.03, 0.03))
        lines.append(f"{d},{fmt(v, 4)}")
    write(name, "\n".join(lines) + "\n")


def traffic_hourly(name, pre, post, recover_to, seed):
    rng = random.Random(seed)
    lines = ["timestamp,value"]
    for d in days(date(2022, 1, 25), date(2022, 4, 25)):
        peak = level(d, pre, post, recover_to) * (1 + rng.uniform(-0.03, 0.03))
        for h in range(24):
            # Diurnal profile with its maximum at 19:00 UTC.
            shape = 0.55 + 0.45 * math.cos((h - 19) * math.pi / 12)
            v = peak * shape if h != 19 else peak
            t = datetime(d.year, d.month, d.day, h, tzinfo=timezone.utc)
            lines.append(f"{t.strftime('%Y-%m-%dT%H:%M:%SZ')},{fmt(v, 4)}")
    write(name, "\n".join(lines) + "\n")


def google_maps():
    rng = random.Random(7)
    lines = ["timestamp,value"]
    for d in days(date(2022, 1, 25), date(2022, 4, 25)):
        k = (d - EVENT).days
        if k < 0:
            v = 1.0
        elif k <= 21:
            # From +220% on the first days down to +25% after three weeks.
            v = 1.0 + 2.2 * math.exp(-k * math.log(2.2 / 0.25) / 21)
        else:
            v = 1.0 + 0.25 * max(0.0, 1 - (k - 21) / 60)
        lines.append(f"{d},{fmt(v * (1 + rng.uniform(-0.02, 0.02)), 4)}")
    write("ua_google_maps.csv", "\n".join(lines) + "\n")


# --- refugee flows -----------------------------------------------------------

def flows():
    rng = random.Random(6)
    split = {"PL": 0.545, "RO": 0.150, "RU": 0.130, "HU": 0.098, "MD": 0.078, "SK": 0.076, "BY": 0.004}
    start, end = EVENT, date(2022, 5, 10)
    profile = {}
    for d in days(start, end):
        k = (d - start).days
        rise = 1 - math.exp(-(k + 1) / 2.0)
        profile[d] = rise * (0.12 + 0.88 * math.exp(-k / 9.0)) * (1 + rng.uniform(-0.05, 0.05))
    scale = 5_950_000 / sum(profile.values())
    lines = ["date,country,individuals"]
    for d in sorted(profile):
        total = profile[d] * scale
        for c, s in split.items():
            share = s / sum(split.values())
            lines.append(f"{d},{c},{int(round(total * share * (1 + rng.uniform(-0.05, 0.05))))}")
    write("flows.csv", "\n".join(lines) + "\n")


# --- Statcounter-style share series -----------------------------------------

def share_series():
    rng = random.Random(13)
    rows = []

    def add(d, country, metric, key, v):
        rows.append((d, country, metric, key, fmt(min(1.0, max(0.0, v)), 5)))

    # Long-run Nokia share in Ukraine, one point per year.
    for year, v in zip(range(2015, 2022), [0.13, 0.10, 0.071, 0.044, 0.026, 0.014, 0.0085]):
        add(date(year, 1, 1), "UA", "mobile_vendor", "Nokia", v)
    for d in days(date(2022, 1, 1), date(2022, 4, 30)):
        k = (d - EVENT).days
        if k < 0:
            nokia = 0.0085
        elif k < 10:
            nokia = 0.0085 + (0.13 - 0.0085) * (k + 1) / 10
        else:
            nokia = 0.13 - (0.13 - 0.05) * min(1.0, (k - 9) / 55)
        add(d, "UA", "mobile_vendor", "Nokia", nokia)
        add(d, "UA", "mobile_vendor", "Xiaomi", 0.27 + rng.uniform(-0.005, 0.005) - (nokia - 0.0085) / 2)
        add(d, "UA", "mobile_vendor", "Samsung", 0.24 + rng.uniform(-0.005, 0.005) - (nokia - 0.0085) / 2)

        xiaomi_pl = 0.16 + (0.035 * min(1.0, (k + 1) / 18) if k >= 0 else 0.0)
        add(d, "PL", "mobile_vendor", "Xiaomi", xiaomi_pl + rng.uniform(-0.002, 0.002))

        # Mobile/desktop ratio: pre 1.63, about +13% over the first three
        # weeks, then below the pre-war level.
        if k < 0:
            ratio = 1.63
        elif k < 21:
            ratio = 1.63 * (1 + 0.13 * min(1.0, (k + 1) / 5))
        else:
            ratio = 1.50
        ratio *= 1 + rng.uniform(-0.01, 0.01)
        add(d, "UA", "platform", "mobile", ratio / (1 + ratio) * 0.99)
        add(d, "UA", "platform", "desktop", 1 / (1 + ratio) * 0.99)
        pl_ratio = 1.25 * (1 + (0.12 * min(1.0, (k + 1) / 7) if 0 <= k < 28 else 0.0)) * (1 + rng.uniform(-0.01, 0.01))
        add(d, "PL", "platform", "mobile", pl_ratio / (1 + pl_ratio) * 0.98)
        add(d, "PL", "platform", "desktop", 1 / (1 + pl_ratio) * 0.98)

    # google.com.ua share of search requests per country.
    peaks = {"PL": (7, 0.0060, 0.0025), "DE": (18, 0.0011, 0.0007), "NL": (16, 0.0009, 0.0005),
             "FR": (17, 0.0005, 0.0003), "RU": (10, 0.0030, 0.0022)}
    for country, (peak_day, peak, settle) in peaks.items():
        base = settle / 6
        for d in days(date(2022, 1, 1), date(2022, 5, 31)):
            k = (d - EVENT).days
            if k < 0:
                v = base
            elif k <= peak_day:
                v = base + (peak - base) * (k + 1) / (peak_day + 1)
            else:
                v = settle + (peak - settle) * math.exp(-(k - peak_day) / 10)
            if country == "DE" and d == date(2022, 5, 1):
                v = 0.0007
            else:
                v *= 1 + rng.uniform(-0.03, 0.03)
            add(d, country, "search_host", "google.com.ua", v)

    lines = ["date,country,metric,key,value"] + [",".join(map(str, r)) for r in rows]
    write("share_series.csv", "\n".join(lines) + "\n")


# --- Speedtest ranks ----------------------------------------------------------

def ranks():
    rng = random.Random(31)
    feb_mar = {
        # country: (fixed Feb, fixed Mar, mobile Feb, mobile Mar)
        "PL": (30, 31, 41, 43),
        "UA": (54, 56, 95, 97),
        "RO": (7, 7, 36, 37),
        "HU": (24, 23, 44, 44),
        "SK": (45, 46, 55, 55),
        "MD": (40, 40, 70, 69),
        "BY": (75, 76, 90, 90),
        "RU": (60, 60, 92, 93),
    }
    lines = ["country,month,kind,rank"]
    months = [(2021, m) for m in range(3, 13)] + [(2022, 1), (2022, 2), (2022, 3), (2022, 4)]
    for c, (ff, fm, mf, mm) in feb_mar.items():
        for kind, feb, mar in (("fixed", ff, fm), ("mobile", mf, mm)):
            for y, m in months:
                if (y, m) == (2022, 2):
                    r = feb
                elif (y, m) == (2022, 3):
                    r = mar
                elif (y, m) == (2022, 4):
                    r = mar + rng.randint(-1, 1)
                else:
                    r = max(1, feb + rng.randint(-3, 3))
                lines.append(f"{c},{y:04}-{m:02},{kind},{r}")
    write("ranks.csv", "\n".join(lines) + "\n")


if __name__ == "__main__":
    site_analytics()
    synth()
    probes()
    traffic_hourly("ua_cloudflare.csv", 0.92, 0.69, 0.88, seed=1)
    traffic_daily("ua_google_search.csv", 0.95, 0.665, 0.93, seed=2)
    traffic_daily("pl_cloudflare.csv", 0.62, 0.875, 0.70, seed=3)
    google_maps()
    flows()
    share_series()
    ranks()
