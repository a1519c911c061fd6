"""Assembles the hand-written support corpus used by the cosine substitute check.

Every topic has a four-sentence context, answer sentences that restate one
context sentence (supported), and answer sentences with no support in the
context. Triples are fixed combinations of those sentences, so each answer
sentence's gold label is known by construction.

Usage: python3 scripts/make_hand_corpus.py > crates/core/tests/fixtures/hand_corpus.jsonl
"""

import json

TOPICS = [
    {
        "question": "How do I pair my phone?",
        "context": [
            "To pair a phone, press the phone button on the steering wheel and say pair phone.",
            "The radio screen displays a four digit PIN when pairing begins.",
            "Enter the PIN on your mobile device when it asks for a passkey.",
            "Up to ten mobile devices can be paired with the system.",
        ],
        "supported": [
            "Press the phone button on the steering wheel and say pair phone to pair a phone.",
            "When pairing begins the radio screen shows a four digit PIN.",
            "Enter the displayed PIN on your mobile device when prompted for a passkey.",
            "The system can pair up to ten mobile devices.",
        ],
        "unsupported": [
            "The phone must be restarted after every pairing attempt.",
            "Bluetooth pairing requires a paid subscription from the dealer.",
            "Check the engine oil level every time you refuel.",
            "The sunroof closes automatically when rain is detected.",
            "Pairing erases all contacts stored on the phone.",
        ],
    },
    {
        "question": "How often should I check tire pressure?",
        "context": [
            "Check tire pressure at least once a month when the tires are cold.",
            "The recommended cold tire pressure is printed on the label on the driver door pillar.",
            "The tire pressure warning light turns on when one or more tires are significantly underinflated.",
            "Do not exceed the maximum inflation pressure molded on the tire sidewall.",
        ],
        "supported": [
            "Tire pressure should be checked at least once a month while the tires are cold.",
            "The label on the driver door pillar lists the recommended cold tire pressure.",
            "When one or more tires are significantly underinflated, the tire pressure warning light turns on.",
            "Never exceed the maximum inflation pressure molded on the sidewall of the tire.",
        ],
        "unsupported": [
            "Tires should be inflated with helium for better fuel economy.",
            "The spare tire is stored under the rear passenger seat.",
            "Rotate the wipers every six months.",
            "The warning light can be disabled permanently from the radio menu.",
            "Overinflated tires improve braking on wet roads.",
        ],
    },
    {
        "question": "How does remote start work?",
        "context": [
            "Press the remote start button on the key fob twice within five seconds to start the engine.",
            "The engine will run for fifteen minutes unless the ignition is placed in the on position.",
            "Press the remote start button once to turn the engine off.",
            "Remote start does not work if the hood is open.",
        ],
        "supported": [
            "To start the engine, press the remote start button on the key fob twice within five seconds.",
            "Unless the ignition is placed in the on position, the engine runs for fifteen minutes.",
            "To turn the engine off, press the remote start button once.",
            "If the hood is open, remote start does not work.",
        ],
        "unsupported": [
            "Remote start only works when the fuel tank is full.",
            "The key fob battery lasts for the lifetime of the vehicle.",
            "Heated seats can be adjusted from the rear cargo area.",
            "Remote start unlocks all doors and opens the trunk.",
            "You can start the engine from any distance using a smartphone.",
        ],
    },
    {
        "question": "How do I check the engine oil?",
        "context": [
            "Use only engine oil that meets the specification listed in this manual.",
            "Check the engine oil level with the vehicle parked on level ground.",
            "Wait at least five minutes after turning off the engine before checking the oil level.",
            "The oil change indicator message appears when an oil change is due.",
        ],
        "supported": [
            "Only use engine oil that meets the specification listed in this manual.",
            "Park the vehicle on level ground to check the engine oil level.",
            "After turning off the engine, wait at least five minutes before checking the oil level.",
            "When an oil change is due, the oil change indicator message appears.",
        ],
        "unsupported": [
            "Synthetic oil must never be used in this engine.",
            "The oil should be changed every two hundred miles.",
            "The glove box light turns on when the door is opened.",
            "Adding extra oil improves engine performance in winter.",
            "The dealer resets the oil indicator remotely over the internet.",
        ],
    },
    {
        "question": "How do I use adaptive cruise control?",
        "context": [
            "Adaptive cruise control maintains a set following distance from the vehicle ahead.",
            "Press the cruise on off button to activate the system.",
            "Use the distance button to choose one of four following distance settings.",
            "The system may not detect stationary vehicles or pedestrians.",
        ],
        "supported": [
            "The adaptive cruise control keeps a set following distance from the vehicle ahead.",
            "To activate the system, press the cruise on off button.",
            "You can use the distance button to choose one of four following distance settings.",
            "Stationary vehicles or pedestrians may not be detected by the system.",
        ],
        "unsupported": [
            "Adaptive cruise control steers the vehicle around sharp corners automatically.",
            "The system works only at speeds above one hundred miles per hour.",
            "Fold the rear seats forward to increase cargo space.",
            "The distance settings are stored on the key fob battery.",
            "Cruise control will automatically park the vehicle at your destination.",
        ],
    },
    {
        "question": "How do the windshield wipers work?",
        "context": [
            "Rotate the end of the wiper lever to select the wiper speed.",
            "Push the lever toward the dashboard to spray washer fluid.",
            "Rain sensing wipers adjust their speed based on the amount of moisture detected.",
            "Replace the wiper blades when they streak or leave unwiped areas.",
        ],
        "supported": [
            "To select the wiper speed, rotate the end of the wiper lever.",
            "Push the wiper lever toward the dashboard to spray washer fluid.",
            "Based on the amount of moisture detected, rain sensing wipers adjust their speed.",
            "When the wiper blades streak or leave unwiped areas, replace them.",
        ],
        "unsupported": [
            "Washer fluid should be replaced with engine coolant in summer.",
            "The wipers turn on automatically when the radio is muted.",
            "Seat belts must be inspected by the dealer every week.",
            "Wiper blades never need replacement during the vehicle life.",
            "Pull the lever twice to open the fuel door.",
        ],
    },
    {
        "question": "Where should children sit?",
        "context": [
            "Children twelve years old and under should ride properly restrained in a rear seat.",
            "Never place a rear facing child seat in front of an active front airbag.",
            "Use the LATCH anchors in the rear seat to install a compatible child seat.",
            "Attach the top tether strap to the tether anchor behind the seat.",
        ],
        "supported": [
            "Children twelve years old and under should ride in a rear seat properly restrained.",
            "A rear facing child seat must never be placed in front of an active front airbag.",
            "Install a compatible child seat using the LATCH anchors in the rear seat.",
            "Attach the top tether strap to the tether anchor located behind the seat.",
        ],
        "unsupported": [
            "Child seats may be installed in the cargo area for long trips.",
            "The front airbag is safe for infants in rear facing seats.",
            "Adjust the headlight aim using the knob beside the steering column.",
            "Tether straps should be removed while the vehicle is moving.",
            "Booster seats are required for all passengers under six feet tall.",
        ],
    },
    {
        "question": "What fuel should I use?",
        "context": [
            "This vehicle is designed to use unleaded regular gasoline with an octane rating of 87.",
            "The fuel door is located on the left side of the vehicle.",
            "Do not overfill the fuel tank after the nozzle shuts off.",
            "A loose gas cap may cause the malfunction indicator light to turn on.",
        ],
        "supported": [
            "The vehicle is designed to use unleaded regular gasoline with an octane rating of 87.",
            "The fuel door is on the left side of the vehicle.",
            "After the nozzle shuts off, do not overfill the fuel tank.",
            "The malfunction indicator light may turn on because of a loose gas cap.",
        ],
        "unsupported": [
            "Diesel fuel can be mixed with gasoline to improve mileage.",
            "The fuel door opens only when the engine is running.",
            "Press the horn twice to lock the rear windows.",
            "Premium fuel is required for the warranty to remain valid.",
            "A loose gas cap will cause the engine to shut down immediately.",
        ],
    },
    {
        "question": "How do I turn on the headlights?",
        "context": [
            "Rotate the headlight switch to the auto position to turn on automatic headlights.",
            "Push the multifunction lever forward to switch on the high beams.",
            "Automatic high beam control dims the high beams when oncoming traffic is detected.",
            "Fog lights can be turned on only when the low beams are on.",
        ],
        "supported": [
            "Turn on automatic headlights by rotating the headlight switch to the auto position.",
            "To switch on the high beams, push the multifunction lever forward.",
            "When oncoming traffic is detected, automatic high beam control dims the high beams.",
            "The fog lights can only be turned on when the low beams are on.",
        ],
        "unsupported": [
            "Headlights must be turned off while driving through tunnels.",
            "High beams are required by law during daylight hours.",
            "The trunk can be opened by pressing the brake pedal three times.",
            "Fog lights automatically replace the brake lights in heavy rain.",
            "The headlight bulbs should be cleaned with gasoline monthly.",
        ],
    },
    {
        "question": "How do I jump start the vehicle?",
        "context": [
            "Connect the positive jumper cable to the positive post of the discharged battery.",
            "Connect the other end of the positive cable to the positive post of the booster battery.",
            "Connect the negative cable to a good engine ground away from the battery.",
            "Remove the cables in the reverse order after the engine starts.",
        ],
        "supported": [
            "Connect the positive jumper cable to the positive post of the discharged battery first.",
            "Connect the other end of the positive cable to the booster battery positive post.",
            "The negative cable should connect to a good engine ground away from the battery.",
            "After the engine starts, remove the cables in the reverse order.",
        ],
        "unsupported": [
            "Jump starting requires removing the battery from the vehicle.",
            "Connect both cables to the same battery post for a faster start.",
            "The cabin air filter is located behind the glove box.",
            "Jumper cables can be replaced with ordinary household wire.",
            "Keep the engine of the booster vehicle off for at least one hour.",
        ],
    },
]

# Answer layouts: ("s", i) is supported sentence i, ("u", i) unsupported i.
LAYOUTS = [
    [("s", 0), ("s", 1)],
    [("s", 2), ("u", 0)],
    [("s", 3), ("s", 0)],
    [("u", 1), ("u", 2)],
    [("s", 3), ("u", 4), ("s", 2)],
]

METHODS = ["Sparse", "EnsembleTop1", "EnsembleTop3", "AdaptiveEnsemble"]


def main():
    n = 0
    for t, topic in enumerate(TOPICS):
        for l, layout in enumerate(LAYOUTS):
            sentences, labels = [], []
            for kind, i in layout:
                if kind == "s":
                    sentences.append(topic["supported"][i])
                    labels.append("Supported")
                else:
                    sentences.append(topic["unsupported"][i])
                    labels.append("Neither")
            hallucinated = "Neither" in labels
            record = {
                "id": f"hc-{t:02d}{'abcde'[l]}",
                "question": topic["question"],
                "context_raw": " ".join(topic["context"]),
                "context_sentences": topic["context"],
                "answer_raw": " ".join(sentences),
                "answer_sentences": sentences,
                "retrieval_method": METHODS[n % len(METHODS)],
                "split": "Test",
                "gold_sentence_labels": labels,
                "gold_example_label": "Hallucinated" if hallucinated else "NotHallucinated",
                "answerable": True,
                "does_not_answer": False,
            }
            print(json.dumps(record, ensure_ascii=False))
            n += 1


if __name__ == "__main__":
    main()
