"""Rule-based sentiment scoring over a small built-in valence lexicon.

Each valenced token contributes its base score, adjusted by intensity
boosters and flipped (with damping) when a negator appears within the
three preceding tokens. The total is compressed into (-1, 1) with
x / sqrt(x^2 + 15). Scores are comparable across texts but are not meant
to reproduce any particular published scorer; only sign and ordering
behaviour are contractual.
"""

from .tokens import tokenize

# token -> valence in [-4, 4]
VALENCE = {
    # positive
    "good": 1.9, "great": 3.1, "awesome": 3.1, "amazing": 2.8, "excellent": 3.2,
    "love": 3.2, "loved": 2.9, "loves": 2.7, "like": 1.5, "liked": 1.8,
    "happy": 2.7, "happier": 2.5, "happiness": 2.6, "glad": 2.0, "joy": 2.8,
    "win": 2.8, "winner": 2.8, "winning": 2.4, "won": 2.7, "success": 2.7,
    "successful": 2.6, "progress": 1.8, "proud": 2.2, "hope": 1.9, "hopeful": 2.3,
    "motivated": 2.0, "motivation": 1.6, "support": 1.7, "supportive": 2.1,
    "encourage": 1.9, "encouraging": 2.1, "thanks": 1.9, "thank": 1.7,
    "grateful": 2.4, "nice": 1.8, "better": 1.9, "best": 3.2, "strong": 1.5,
    "stronger": 1.8, "healthy": 1.9, "healthier": 2.1, "energized": 1.9,
    "confident": 2.2, "confidence": 1.9, "inspired": 2.3, "inspiring": 2.5,
    "celebrate": 2.4, "achievement": 2.2, "achieved": 2.0, "accomplished": 2.3,
    "fantastic": 3.0, "wonderful": 2.9, "perfect": 2.9, "easy": 1.2,
    "easier": 1.4, "fun": 2.3, "enjoy": 2.2, "enjoyed": 2.3, "welcome": 1.6,
    "welcoming": 2.0, "friendly": 2.1, "kind": 1.8, "helpful": 1.9,
    "helped": 1.5, "help": 1.3, "improvement": 1.9, "improved": 1.9,
    "improving": 1.8, "yay": 2.4, "congrats": 2.7, "congratulations": 2.9,
    # negative
    "bad": -2.5, "terrible": -3.0, "awful": -2.9, "horrible": -3.0,
    "hate": -3.1, "hated": -2.9, "hates": -2.7, "sad": -2.1, "sadder": -2.3,
    "unhappy": -2.3, "depressed": -2.8, "depressing": -2.5, "depression": -2.4,
    "fail": -2.4, "failed": -2.4, "failure": -2.6, "failing": -2.3,
    "lose": -1.3, "losing": -1.1, "lost": -1.2, "worst": -3.1, "worse": -2.1,
    "angry": -2.5, "anger": -2.2, "mad": -2.2, "furious": -2.9, "rage": -2.7,
    "annoyed": -1.8, "annoying": -1.9, "frustrated": -2.1, "frustrating": -2.2,
    "frustration": -2.0, "stress": -1.8, "stressed": -2.0, "stressful": -2.1,
    "anxious": -2.0, "anxiety": -2.0, "worried": -1.8, "worry": -1.6,
    "afraid": -2.0, "fear": -2.1, "scared": -2.1, "cry": -2.0, "crying": -2.1,
    "cried": -2.0, "hurt": -2.1, "hurts": -2.1, "pain": -2.2, "painful": -2.3,
    "sick": -2.0, "tired": -1.4, "exhausted": -1.9, "miserable": -2.9,
    "hopeless": -2.7, "useless": -2.3, "worthless": -2.8, "ashamed": -2.3,
    "shame": -2.1, "guilty": -2.0, "guilt": -1.9, "disgusting": -2.7,
    "disgusted": -2.5, "gross": -2.1, "ugly": -2.3, "fat": -1.6,
    "struggle": -1.8, "struggling": -1.9, "struggled": -1.8, "hard": -0.8,
    "harder": -1.0, "difficult": -1.3, "impossible": -1.9, "quit": -1.6,
    "quitting": -1.5, "gave": -0.3, "alone": -1.4, "lonely": -2.1,
    "wrong": -1.7, "problem": -1.4, "problems": -1.5, "hungry": -1.0,
    "starving": -1.8, "binge": -1.9, "binged": -1.9, "relapse": -2.2,
}

NEGATORS = frozenset({
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor",
    "cannot", "can't", "don't", "doesn't", "didn't", "won't", "wouldn't",
    "couldn't", "shouldn't", "isn't", "aren't", "wasn't", "weren't",
    "haven't", "hasn't", "hadn't", "ain't", "without", "hardly", "barely",
    "rarely", "seldom",
})

# booster token -> additive intensity, applied in the direction of the
# valence it modifies
BOOSTERS = {
    "very": 0.3, "really": 0.3, "extremely": 0.4, "incredibly": 0.4,
    "so": 0.25, "super": 0.3, "totally": 0.25, "absolutely": 0.35,
    "completely": 0.3, "utterly": 0.35, "quite": 0.15, "pretty": 0.15,
    "slightly": -0.2, "somewhat": -0.15, "kinda": -0.15, "barely": -0.3,
    "marginally": -0.2, "almost": -0.1,
}

_NEGATION_WINDOW = 3
_NEGATION_FACTOR = -0.75
_NORMALIZATION_ALPHA = 15.0


def sentiment_score(text) -> float:
    """Score text in (-1, 1); empty or valence-free text scores 0."""
    tokens = tokenize(text)
    total = 0.0
    for i, token in enumerate(tokens):
        base = VALENCE.get(token)
        if base is None:
            continue
        v = base
        window = tokens[max(0, i - _NEGATION_WINDOW):i]
        for prev in window:
            boost = BOOSTERS.get(prev)
            if boost is not None:
                v += boost if v > 0 else -boost
        if any(prev in NEGATORS for prev in window):
            v *= _NEGATION_FACTOR
        total += v
    if total == 0.0:
        return 0.0
    return total / (total * total + _NORMALIZATION_ALPHA) ** 0.5
