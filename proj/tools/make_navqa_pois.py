#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The featsearch Authors
"""Writes the synthetic venue snapshot used by the bundled navigation mock.

Food venues exist for every cuisine x price x payment x parking combination
except two deliberate gaps (no Chinese bakeries, no luxury cafes), so a few
requests have no satisfying venue. Other venues exist for every payment x
parking combination.
"""
import argparse
import itertools
import json

FOOD = ["bar", "restaurant", "cafe", "bakery"]
OTHER = ["hospital", "museum", "car_repair", "pharmacy"]
CUISINES = ["italian", "german", "french", "chinese"]
PRICES = {"cheap": 1, "moderate": 2, "expensive": 3, "luxury": 4}
NAMES = ["Rossi", "Linden", "Marais", "Lotus", "Anker", "Corso", "Brunnen", "Sol",
         "Kirsch", "Vento", "Oak", "Harbor", "Falke", "Perla", "Stern", "Aurora"]
GAPS = {("bakery", "chinese"), ("cafe", "luxury")}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    args = ap.parse_args()
    rows = []
    n = 0
    for venue, cuisine, price, payment, parking in itertools.product(
            FOOD, CUISINES, PRICES, ["cash", "card"], ["no", "yes"]):
        if (venue, cuisine) in GAPS or (venue, price) in GAPS:
            continue
        rows.append({
            "name": f"{NAMES[n % len(NAMES)]} {venue.replace('_', ' ').title()} {n}",
            "category": venue, "cuisine": cuisine, "price_level": PRICES[price],
            "rating": 5.0, "payment": payment, "parking": parking,
            "location": f"district {n % 7 + 1}"})
        n += 1
    for venue, payment, parking in itertools.product(OTHER, ["cash", "card"], ["no", "yes"]):
        rows.append({
            "name": f"{NAMES[n % len(NAMES)]} {venue.replace('_', ' ').title()} {n}",
            "category": venue, "cuisine": "none", "price_level": 0,
            "rating": 5.0, "payment": payment, "parking": parking,
            "location": f"district {n % 7 + 1}"})
        n += 1
    with open(args.out, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
