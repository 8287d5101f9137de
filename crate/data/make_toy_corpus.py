"""Regenerates toy_corpus.jsonl: party programmes whose phrase mix depends on a latent left-right position."""
import json
import math
import random

LEFT = [
    "social justice for working families",
    "raise the minimum wage",
    "public health care for everyone",
    "protect workers rights and trade unions",
    "affordable public housing",
    "renewable energy and climate protection",
]
RIGHT = [
    "lower taxes for small business",
    "free market competition",
    "secure national borders",
    "strong national defence",
    "balanced federal budget",
    "law and order in our cities",
]
FILLER = (
    "we believe the people deserve a government that listens and acts with care "
    "our country faces many challenges today but together we will build a better future "
    "this programme sets out our plans for the coming years in every region"
).split()
PARTIES = {"Greens": -1.2, "Social Democrats": -0.5, "Liberals": 0.4, "Conservatives": 1.1}
YEARS = [2009, 2013, 2017]


def main():
    rng = random.Random(7)
    with open("toy_corpus.jsonl", "w") as out:
        for party, position in PARTIES.items():
            for year in YEARS:
                theta = position + rng.gauss(0, 0.15)
                p_left = 1 / (1 + math.exp(2.0 * theta))
                sentences = []
                for _ in range(60):
                    theme = LEFT if rng.random() < p_left else RIGHT
                    sentences.append(rng.choice(theme))
                    if rng.random() < 0.5:
                        k = rng.randint(3, 8)
                        start = rng.randrange(len(FILLER) - k)
                        sentences.append(" ".join(FILLER[start:start + k]))
                text = ". ".join(s.capitalize() for s in sentences) + "."
                doc_id = f"{party.lower().replace(' ', '_')}_{year}"
                out.write(json.dumps({"id": doc_id, "text": text, "party": party, "year": year}) + "\n")


if __name__ == "__main__":
    main()
