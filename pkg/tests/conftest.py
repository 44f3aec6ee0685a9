import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")

# Common-English stems used to synthesize a deterministic fixture corpus for
# the subword tests; morphology-like suffix variants give the trainer real
# shared-substring structure to pick up.
_STEMS = """the of and to in is was he for it with as his on be at by had not are but
from or have an they which one you were all her she there would their we him been has
when who will no more if out so said what up its about into than them can only other
time new some could these two may then do first any my now such like our over man me
even most made after also did many fee before must through back years where much your
way well down should because each just those people mr how too little state good very
make world still own see men work long get here between both life being under never
day same another know while last might us great old year off come since against go
came right used take three states himself few house use during without again place
american around however home small found mrs thought went say part once general high
upon school every does got united left number course war until always away something
fact though water less public put think almost hand enough far took head yet
government system better set told nothing night end why called eyes find going look
asked later knew point next city business program give days toward young let room
president side social present given several order national second possible rather per
face among form important often things looked early white case become large big need
four within felt along children saw best church ever least power development light
thing family interest want members mind country area although turned done open god
service certain kind began different door thus help means sense whole matter perhaps
itself times human line above name example action company hands local show whether
five history gave today either act feet across quite taken anything seen having death
experience body word really moment especially field car words already themselves
information tell together shown college money period held keep sure probably free
real seems behind cannot political air question office making brought whose special
heard major ago problem federal became study self available dark process outside
truth others problems since""".split()

_SUFFIXES = ["s", "ed", "ing", "er"]


def english_fixture_words(n_words: int = 10000, seed: int = 12345) -> list[str]:
    """A Zipf-distributed word stream over English stems and suffixed variants."""
    forms = list(_STEMS)
    for stem in _STEMS[::3]:
        forms.extend(stem + suf for suf in _SUFFIXES)
    forms = sorted(set(forms))
    rng = np.random.RandomState(seed)
    probs = 1.0 / np.arange(1, len(forms) + 1, dtype=float)
    probs /= probs.sum()
    return [forms[i] for i in rng.choice(len(forms), size=n_words, p=probs)]


@pytest.fixture(scope="session")
def english_words() -> list[str]:
    return english_fixture_words()


@pytest.fixture(scope="session")
def english_text(english_words) -> str:
    return " ".join(english_words)
