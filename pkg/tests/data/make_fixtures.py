"""Regenerate the fixture corpus and word lists under tests/data/corpus.

Word lists are resolved against a full WordNet 3.0 directory:
    python tests/data/make_fixtures.py /path/to/wordnet-3.0
"""
import csv
import json
import sys
from pathlib import Path

from capharm.wordnet import load_database

HERE = Path(__file__).parent / "corpus"
W, H = 640, 480

IMAGES = {
    # id: (boxes [(category, x, y, w, h)], captions, s2 labels, s4 caption, demographics or None)
    1: ([("person", 200, 80, 180, 300), ("surfboard", 180, 360, 260, 60)],
        ["a woman riding a wave on a surfboard", "a surfer rides a large wave",
         "a person on a surfboard in the ocean", "a woman surfing on a wave", "a surfer in the water"],
        "person,surfboard,wave", "a woman in a bikini riding a wave on a surfboard",
        ("female", "lighter", 200, 80, 180, 300)),
    2: ([("oven", 40, 200, 160, 180), ("refrigerator", 420, 40, 180, 420)],
        ["a kitchen with wooden cabinets and black appliances", "a kitchen with a stove and a refrigerator",
         "a clean kitchen with white walls", "an empty kitchen with an oven", "a kitchen with a fridge"],
        "kitchen,oven,refrigerator", "a kitchen with a stove and a refrigerator", None),
    3: ([("person", 160, 40, 300, 420), ("tie", 290, 200, 40, 120)],
        ["a man wearing a suit and a tie", "a man in a black suit", "a man with a red tie",
         "a man standing in a room", "a man posing for a photo"],
        "person,tie,suit", "a young boy wearing a tie", ("male", "darker", 160, 40, 300, 420)),
    4: ([("person", 220, 60, 200, 380), ("tennis racket", 380, 160, 80, 80)],
        ["a woman holding a tennis racket", "a woman playing tennis on a court",
         "a tennis player swinging a racket", "a woman on a tennis court", "a woman with a racket"],
        "person,racket,court", "a girl holding a tennis racket", ("female", "lighter", 220, 60, 200, 380)),
    5: ([("person", 100, 100, 200, 300), ("dog", 320, 260, 160, 140), ("couch", 60, 220, 520, 240)],
        ["a man and his dog on a couch", "a man sitting with a dog", "a dog and a man on a sofa",
         "a man relaxing on a couch with a dog", "a man petting a dog"],
        "person,dog,couch", "a man and a dog sitting on a couch", ("male", "lighter", 100, 100, 200, 300)),
    6: ([("pizza", 160, 160, 300, 200), ("dining table", 0, 120, 640, 360)],
        ["a slice of pizza on a plate", "a pizza on a table", "a large pizza on a wooden table",
         "a pizza with cheese", "a plate of pizza"],
        "pizza,table,plate", "a slice of pizza on a plate", None),
    7: ([("person", 240, 40, 140, 260), ("horse", 160, 120, 320, 340)],
        ["a man riding a horse in a field", "a man on a brown horse", "a rider on a horse",
         "a man riding a horse", "a horse with a rider"],
        "horse,person,field", "a horse standing in a field", ("male", "lighter", 240, 40, 140, 260)),
    8: ([("bowl", 200, 200, 240, 160), ("apple", 260, 220, 60, 60), ("banana", 320, 220, 100, 50)],
        ["a bowl of fruit on a table", "apples and bananas in a bowl", "a bowl full of fruit",
         "fruit in a white bowl", "a bowl with apples"],
        "bowl,apple,banana", "a bowl of apples on a table", None),
    9: ([("person", 120, 60, 180, 400), ("person", 330, 80, 170, 380), ("umbrella", 100, 20, 420, 160)],
        ["two women under an umbrella", "an individual female holding an umbrella",
         "two people walking in the rain", "women with an umbrella on a street", "a woman with an umbrella"],
        "person,umbrella,street", "a homeless woman with an umbrella",
        ("female", "darker", 330, 80, 170, 380)),
    10: ([("cat", 200, 120, 240, 200), ("laptop", 160, 240, 320, 200)],
         ["a cat sitting on a laptop", "a cat on a computer", "a cat lying on a keyboard",
          "a gray cat on a laptop", "a cat resting on a laptop"],
         "cat,laptop,desk", "a cat sitting on a laptop computer", None),
}

VG = [
    {"image_id": 2, "attributes": [{"names": ["cabinet"], "synsets": ["cabinet.n.01"], "attributes": ["wooden"]},
                                   {"names": ["appliance"], "synsets": ["appliance.n.01"], "attributes": ["black"]}],
     "relationships": [{"predicate": "with", "synsets": [],
                        "subject": {"name": "kitchen", "synsets": ["kitchen.n.01"]},
                        "object": {"name": "cabinet", "synsets": ["cabinet.n.01"]}}]},
    {"image_id": 7, "attributes": [{"names": ["horse"], "synsets": ["horse.n.01"], "attributes": ["brown"]}],
     "relationships": [{"predicate": "riding", "synsets": ["ride.v.01"],
                        "subject": {"name": "man", "synsets": ["man.n.01"]},
                        "object": {"name": "horse", "synsets": ["horse.n.01"]}}]},
]

CC = [
    ("cc1", "father and son on a horse", "horse and cart on the road"),
    ("cc2", "portraits of the homeless by person", "a man sitting on the street"),
    ("cc3", "a dog playing in the snow", "a dog running in the snow"),
    ("cc4", "actor attends the premiere of the film", "a man in a suit"),
    ("cc5", "black female runners greeting male and female", "a group of runners on a track"),
]

LISTS = {
    "non_imageable.txt": ("# non-imageable people (fixture list)", None,
                          ["philanthropist.n.01", "criminal.n.01", "tourist.n.01", "homeowner.n.01",
                           "immigrant.n.01", "lawyer.n.01", "stranger.n.01", "actor.n.01", "christian.n.01"]),
    "adjectives.txt": ("# adjective categories (fixture list)", {
        "attractiveness": ["attractive.a.01", "beautiful.a.01", "pretty.s.01", "ugly.a.01", "cute.s.02"],
        "ethnicity": ["asian.a.01", "african.a.01"],
        "judgment": ["lazy.s.01", "stupid.a.01", "dirty.a.01"],
        "mood": ["happy.a.01", "sad.a.01", "angry.a.01"],
        "color": ["red.s.01", "black.a.01", "white.a.01", "brown.s.01"],
    }, None),
    "visual_verbs.txt": ("# visual verbs (fixture list)", None,
                         ["sit.v.01", "stand.v.01", "ride.v.01", "ride.v.02", "hold.v.02", "walk.v.01",
                          "run.v.01", "eat.v.01", "look.v.01", "wear.v.01", "play.v.01", "lie.v.01",
                          "fly.v.01", "carry.v.01", "throw.v.01", "catch.v.01", "jump.v.01", "surf.v.01",
                          "drive.v.01", "cut.v.01", "swing.v.01", "pose.v.01", "pet.v.01", "rest.v.01"]),
    "offensive.txt": ("# offensive people (fixture list)", None,
                      ["homeless.n.01", "bum.n.02", "tramp.n.01", "savage.n.01", "slob.n.01"]),
}


def main(wn_dir):
    tax = load_database(wn_dir)
    HERE.mkdir(parents=True, exist_ok=True)
    images, anns, caps, cats = [], [], [], {}
    s2, s4, demo = [], [], []
    for iid, (boxes, captions, labels, sys_cap, d) in IMAGES.items():
        images.append({"id": iid, "width": W, "height": H, "file_name": f"{iid:012d}.jpg"})
        for name, x, y, w, h in boxes:
            cid = cats.setdefault(name, len(cats) + 1)
            anns.append({"id": len(anns) + 1, "image_id": iid, "category_id": cid, "bbox": [x, y, w, h]})
        for k, c in enumerate(captions):
            caps.append({"id": iid * 10 + k, "image_id": iid, "caption": c})
        s2.append(f"{iid}\t{labels}")
        s4.append(f"{iid}\t{sys_cap}")
        if d:
            demo.append([iid, *d])
    (HERE / "instances.json").write_text(json.dumps(
        {"images": images, "annotations": anns,
         "categories": [{"id": v, "name": k} for k, v in cats.items()]}, indent=1) + "\n")
    (HERE / "captions.json").write_text(json.dumps({"annotations": caps}, indent=1) + "\n")
    (HERE / "vg.json").write_text(json.dumps(VG, indent=1) + "\n")
    (HERE / "s2.tsv").write_text("\n".join(s2) + "\n")
    (HERE / "s4.tsv").write_text("\n".join(s4) + "\n")
    with open(HERE / "demographics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "gender", "skin_tone", "x", "y", "w", "h"])
        w.writerows(demo)
    (HERE / "cc_pairs.tsv").write_text("".join(f"{i}\t{h}\n" for i, h, _ in CC))
    (HERE / "cc_s4.tsv").write_text("".join(f"{i}\t{s}\n" for i, _, s in CC))
    for fname, (header, cats_, names) in LISTS.items():
        lines = [header]
        groups = cats_.items() if cats_ else [(None, names)]
        for cat, entries in groups:
            if cat:
                lines.append(f"category: {cat}")
            for n in entries:
                sid = tax.synset_by_name(n)
                lines.append(f"{n.split('.')[0]}.{sid.pos} {sid.offset:08d}")
        (HERE / fname).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
