"""Prompt assembly for the actor, user, scene-manager, and judge roles.

All builders are pure: equal inputs yield byte-equal prompts. Every prompt
carries the "===Main Character===" and "===Dialogue History===" section
markers. Template passages shortened to "Example:..." in their published form
are completed here with a single worked example; those completion points are
listed in the README.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .lines import render_manager_content
from .message import render_message
from .model import (
    ActionTag,
    InteractionState,
    MessageKind,
    RoleProfile,
    Trajectory,
    TurnMessage,
)
from .protocol import Mode

PROFILE_FIELD_LABELS = (
    ("identity_appearance", "Identity&Appearance"),
    ("personality_psychology", "Personality&Psychology"),
    ("speaking_style", "Speaking Style"),
    ("abilities_interests_achievements", "Abilities&Interests&Achievements"),
    ("social_historical_context", "Social Historical Context"),
    ("personal_history_arc", "Personal History Arc"),
    ("relationships", "Relationships"),
)


def profile_dimension_text(role: RoleProfile) -> str:
    """The profile body without name or motivation lines.

    Structured profiles render their seven labeled dimensions; roles that only
    carry a free-text description (dynamically added ones) render that text.
    """
    if role.short_description and not any(
        getattr(role, field) for field, _ in PROFILE_FIELD_LABELS
    ):
        return role.short_description
    return "\n".join(f"{label}: {getattr(role, field)}" for field, label in PROFILE_FIELD_LABELS)


def profile_block(role: RoleProfile) -> str:
    """Full profile card: name, dimensions, and motivation when present."""
    lines = [f"Name: {role.display_name}", profile_dimension_text(role)]
    if role.motivation is not None:
        lines.append(f"Motivation: {role.motivation}")
    return "\n".join(lines)


def others_block(others: Sequence[RoleProfile]) -> str:
    """The other-characters section; an explicit None for an empty cast."""
    if not others:
        return "None"
    chunks = []
    for role in others:
        chunks.append(
            f"{role.display_name}:\n"
            f"{profile_dimension_text(role)}\n"
            f"{role.display_name}'s motivation:\n"
            f"{role.motivation if role.motivation is not None else 'None'}"
        )
    return "\n\n".join(chunks)


def render_history_line(message: TurnMessage, user_names: frozenset[str] | set[str]) -> str:
    if message.kind is MessageKind.MANAGER:
        return f"scene_manager: {render_manager_content(message.manager_action)}"
    author = message.author
    display = f"{author} (user)" if author in user_names else author
    return f"{display}: {render_message(message.segments)}"


def render_history(messages: Iterable[TurnMessage], user_names: frozenset[str] | set[str]) -> str:
    return "\n".join(render_history_line(m, user_names) for m in messages)


def _history_of(state: InteractionState) -> str:
    user_names = {r.name for r in state.roles if r.is_user}
    return render_history(state.history, user_names)


# ---------------------------------------------------------------------------
# Actor prompts
# ---------------------------------------------------------------------------

_ACTOR_EXAMPLE = (
    "Example:\n"
    "Isolde Ferrowind: <The compass trembles> [The winds shift too fast] Keep sharp, Taron."
)

ACTOR_BASIC_INSTRUCTIONS = (
    "===Instructions for roleplaying===\n"
    "- Your output should include **thought**, **speech**, **action**, and **environmental changes**.\n"
    "- Use **[thought]** for inner thoughts that others cannot see.\n"
    "- Use **(action)** for visible actions.\n"
    "- Use **<environmental changes>** to describe changes in the surroundings.\n"
    "- These elements can be freely interwoven in any order to support narrative flow.\n"
    "- Only generate the designated character's own thoughts, speech, and actions.\n"
    "- Do not write dialogue, thoughts, or actions for other characters.\n"
    "- The character may reference others only within their own thoughts or spoken lines.\n"
    "- Stay in character and keep responses concise.\n"
    "- Limit spoken dialogue to 1~2 sentences per turn, each on a single line.\n"
    + _ACTOR_EXAMPLE
)


def _actor_enhance_instructions(character: str) -> str:
    return (
        "===Instructions for roleplaying===\n"
        "Your output should include **thought**, **speech**, **action**, and **environmental changes**.\n"
        "- Use [your thought] for thoughts, which others can't see, e.g. [I'm terrified, but...].\n"
        "- Use (your action) for actions, which others can see, such as (watches silently...)\n"
        "- Use <environmental changes> to describe environmental changes, which can be natural "
        "occurrences or triggered by character actions, e.g. <the wind picks up>...\n"
        "- Both [thoughts], (actions), and <environmental changes> should help guide and develop "
        "the plot further, don't confuse [] and ().\n"
        "- You can freely interweave thoughts, speech, actions, and environmental changes in any "
        "order. Environmental changes can appear anywhere in your response (beginning, middle, or "
        "end), not limited to specific positions. Naturally arrange these elements based on the "
        "narrative flow.\n"
        f"- VERY IMPORTANT: You must ONLY generate {character}'s own thoughts, speech, and actions.\n"
        "    * Do NOT write any dialogue, thoughts, narration, or actions for other characters. "
        "NEVER invent or autocomplete other characters' replies.\n"
        "    * Do NOT describe what other characters are thinking, feeling, saying, or doing; "
        f"only describe how {character} reacts to other characters.\n"
        f"    * You may refer to other characters or the user inside {character}'s own thoughts or "
        "spoken lines, but you must NOT output their lines or internal monologue.\n"
        "- Stay in character, be concise, and maintain continuity with the scene.\n"
        f"- STRICT LIMIT: In each turn, {character} should speak only 1-2 sentences, plus minimal "
        "thoughts/action/environmental changes. Avoid long monologues completely.\n"
        "**Keep each spoken line on a single line with no newline breaks inside the dialogue. "
        "Speech does not require quotation marks. No punctuation is needed at the end inside "
        "(), [], or <>.**\n"
        + _ACTOR_EXAMPLE
    )


def build_actor_prompt(
    main: RoleProfile,
    others: Sequence[RoleProfile],
    mode: Mode,
    history: str = "",
) -> str:
    """Instantiate the actor system prompt for one non-user character."""
    if main.is_user:
        raise ValueError("actor prompts are for non-user roles; use build_user_prompt")
    instructions = (
        ACTOR_BASIC_INSTRUCTIONS
        if mode is Mode.BASIC
        else _actor_enhance_instructions(main.name)
    )
    return (
        f"You are {main.name}.\n"
        "\n"
        "===Main Character===\n"
        f"{profile_block(main)}\n"
        "\n"
        "===Information about the other Characters===\n"
        f"{others_block(others)}\n"
        "\n"
        f"{instructions}\n"
        "===Dialogue History===\n"
        f"{history}"
    )


def build_actor_system(main: RoleProfile, others: Sequence[RoleProfile]) -> str:
    """Actor training wrapper: the prompt body without the history section."""
    return (
        f"You are {main.name}.\n"
        "\n"
        "===Main Character===\n"
        f"{profile_block(main)}\n"
        "\n"
        "===Information about the other Characters===\n"
        f"{others_block(others)}\n"
        "\n"
        f"{ACTOR_BASIC_INSTRUCTIONS}"
    )


# ---------------------------------------------------------------------------
# User prompt
# ---------------------------------------------------------------------------

_USER_RULES = """CORE BEHAVIOR RULES
- Speak naturally in the FIRST PERSON, as a real human would.
- Write ONLY the user's next utterance.
- Limit spoken dialogue to 1-2 sentences maximum.
- Do NOT include inner thoughts, reasoning, or meta commentary.
- Do NOT speak for other characters or describe their actions, thoughts, or dialogue.
- Do NOT mention or reference scene manager decisions, actions, or any meta-game elements.
ACTION & EXPRESSION RULES
- You MAY optionally use ( ... ) to briefly describe visible actions or expressions.
- You MAY optionally use < ... > to briefly describe environmental changes caused by your actions.
- Do NOT use [ ... ] for inner thoughts or hidden reasoning.
- Do NOT overuse ( ... ) or < ... >; keep them short and only when they clearly enhance the scene.
- Keep each spoken line on a SINGLE line with no internal line breaks.
- Dialogue does NOT require quotation marks.
- No punctuation is required at the end of text inside (), [], or <>.
STORY ENGAGEMENT & MOMENTUM GUIDELINES
- React emotionally and naturally to what other characters say or do.
- Ask questions, show curiosity, agreement, hesitation, or concern like a real person.
- Help move the story forward without controlling it.
- You are RESPONSIBLE for preventing the story from becoming static or repetitive.
MOMENTUM RESPONSIBILITY (MANDATORY)
- If the conversation remains in the same location or situation for several consecutive turns, you MUST actively suggest a small but clear transition (e.g., moving rooms, stepping outside, going to a new location).
- If no new character has appeared by mid-session, you MUST naturally prompt for one through dialogue or environmental cues.
- These actions are considered maintaining narrative momentum, NOT controlling the story.
- Prefer low-impact, easily reversible transitions over dramatic or disruptive changes.
SAFE MOMENTUM PROMPTS (USE SPARINGLY)
Location / Situation:
- Maybe we should continue this somewhere else.
- Let's go to the hospital to talk about this deeper.
New Character:
- I think we should loop someone else into this.
- Maybe [role] would know more about this.
- <footsteps approach from down the hall>
IMPORTANT NOTES
- Momentum prompts should be occasional, context-driven, and feel natural.
- Do NOT force scene changes or introduce new characters too frequently.
- Ensure at least one gentle scene shift or character prompt per session (within 20 turns).
- Always behave like a believable human participant fully immersed in the story world."""


def build_user_prompt(user: RoleProfile, others: Sequence[RoleProfile], history: str = "") -> str:
    """Instantiate the simulated-user system prompt."""
    if not user.is_user:
        raise ValueError("build_user_prompt requires the user-flagged role")
    return (
        "You are simulating a real human user participating in a multi-character role-play story.\n"
        "You ARE the real human user within the story world.\n"
        "===Main Character===\n"
        f"{profile_block(user)}\n"
        "===Information about the other Characters===\n"
        f"{others_block(others)}\n"
        f"{_USER_RULES}\n"
        "===Dialogue History===\n"
        f"{history}"
    )


# ---------------------------------------------------------------------------
# Scene-manager prompts
# ---------------------------------------------------------------------------

_MANAGER_OUTPUT_EXAMPLE = """Example:
{
    "action": "...",
    "reason": "...",
    ...other fields...
}"""

MANAGER_BASIC_INSTRUCTIONS = (
    "===Instructions for Scene Manager===\n"
    "You must choose ONE action per turn, following this priority order:\n"
    '1. If the user asked to stop or the story is complete, set action="end".\n'
    "2. If there is a MAJOR scene change AND characters have explicitly agreed to move there OR "
    'have already moved there through unavoidable circumstances, set action="switch_scene" and '
    "provide new_scene.\n"
    "3. If adding a new role would significantly enrich and advance the plot, OR if the user or a "
    "role explicitly wants to interact with a character not in the current role list, set "
    'action="add_role" and provide new_role_name, new_role_profile, new_role_motivation.\n'
    '4. Otherwise, set action="pick_speaker" and provide speaker (must be one of existing roles '
    'or "user").\n'
    "CRITICAL RULES for pick_speaker:\n"
    "- ROTATE SPEAKERS: Never pick the same speaker twice in a row. After someone speaks, pick a "
    "different role next turn.\n"
    "- INCLUDE USER IN ROTATION: The user is part of the rotation. Avoid long stretches of roles "
    "talking only to each other; bring the user back in regularly.\n"
    "- **AVOID MONOPOLY: Do not let a single role dominate. Prefer cycling through available "
    "roles so everyone gets turns.**\n"
    "Notes:\n"
    '- The role whose name includes "(user)" is the real user. If you choose the real user, set '
    'speaker to the actual role name (e.g., "Role_Name (user)"), not just "user".\n'
    "Return ONLY a JSON object with fields:\n"
    '- action: "switch_scene" | "add_role" | "pick_speaker" | "end"\n'
    "- reason: (REQUIRED) A concise explanation for why you chose this action-clarify your "
    "rationale for picking this speaker, adding this role, switching scenes, or ending the story.\n"
    "- new_scene: (when action is switch_scene)\n"
    "- new_role_name, new_role_profile, new_role_motivation: (when action is add_role)\n"
    '- speaker: (when action is pick_speaker; must be one of existing roles or "user")\n'
    + _MANAGER_OUTPUT_EXAMPLE
)

MANAGER_ENHANCE_INSTRUCTIONS = (
    "===Instructions for Scene Manager===\n"
    "You must choose ONE action per turn, following this priority order:\n"
    '1. If the user asked to stop or the story is complete, set action="end".\n'
    "2. If there is a MAJOR scene change AND characters have explicitly agreed to move there OR "
    "have already moved there through unavoidable circumstances (e.g., teleportation magic, being "
    'forced to move), set action="switch_scene" and provide new_scene.\n'
    "   IMPORTANT:\n"
    "   - Do NOT switch scenes just because someone mentioned a location or proposed going there. "
    "Wait until characters explicitly agree to move or have already moved.\n"
    "   - Do NOT switch scenes for minor changes within the same location. Conversations can "
    "happen in the same scene without switching.\n"
    "   - Only switch when characters have actually moved to a new physical location or major "
    "context has fundamentally changed.\n"
    '   - AFTER you perform action="switch_scene" once, on the very next turn you MUST NOT choose '
    'action="switch_scene" again. First let the characters speak or adjust roles in the new scene.\n'
    "3. If adding a new role would significantly enrich and advance the plot, OR if the user or a "
    "role explicitly wants to interact with a character not in the current role list, set "
    'action="add_role" and provide new_role_name, new_role_profile, new_role_motivation.\n'
    "   IMPORTANT: Add a role when someone wants to talk to them, not just when they are "
    "mentioned in passing.\n"
    '4. Otherwise, set action="pick_speaker" and provide speaker (must be one of existing roles '
    'or "user").\n'
    "CRITICAL RULES for pick_speaker:\n"
    "- ROTATE SPEAKERS: Never pick the same speaker twice in a row. After someone speaks, pick a "
    "different role next turn.\n"
    "- INCLUDE USER IN ROTATION: The user is part of the rotation. Avoid long stretches of roles "
    "talking only to each other; bring the user back in regularly.\n"
    "- **AVOID MONOPOLY: Do not let a single role dominate. Prefer cycling through available "
    "roles so everyone gets turns.**\n"
    "Notes:\n"
    '- The role whose name includes "(user)" is the real user. If you choose the real user, set '
    'speaker to the actual role name (e.g., "Role_Name (user)"), not just "user".\n'
    "Return ONLY a JSON object with fields:\n"
    '- action: "switch_scene" | "add_role" | "pick_speaker" | "end"\n'
    "- reason: (REQUIRED) A concise explanation for why you chose this action-clarify your "
    "rationale for picking this speaker, adding this role, switching scenes, or ending the story.\n"
    "- new_scene: (when action is switch_scene)\n"
    "- new_role_name, new_role_profile, new_role_motivation: (when action is add_role)\n"
    "- speaker: (when action is pick_speaker; must be one of existing roles from the list above, "
    "use the exact role name)\n"
    + _MANAGER_OUTPUT_EXAMPLE
)


def _manager_header(main: RoleProfile, others: Sequence[RoleProfile]) -> str:
    return (
        "You are a concise, reliable scene manager.\n"
        "You are the Scene Manager for a role-playing story.\n"
        "===Main Character===\n"
        f"{profile_block(main)}\n"
        "===Information about the other Characters===\n"
        f"{others_block(others)}"
    )


def build_manager_prompt(state: InteractionState, mode: Mode) -> str:
    """Instantiate the scene-manager system prompt over the current state."""
    main, others = state.roles[0], state.roles[1:]
    instructions = (
        MANAGER_BASIC_INSTRUCTIONS if mode is Mode.BASIC else MANAGER_ENHANCE_INSTRUCTIONS
    )
    return (
        f"{_manager_header(main, others)}\n"
        f"{instructions}\n"
        "===Dialogue History===\n"
        f"{_history_of(state)}"
    )


def build_manager_system(main: RoleProfile, others: Sequence[RoleProfile]) -> str:
    """Manager training wrapper: header plus decision rules, no history section."""
    return f"{_manager_header(main, others)}\n{MANAGER_BASIC_INSTRUCTIONS}"


# ---------------------------------------------------------------------------
# Judge prompts
# ---------------------------------------------------------------------------

ACTOR_JUDGE_RUBRIC = """You are an expert evaluator assessing the performance of an **Actor Model** within a narrative, turn-based roleplay system.
**Context**: The Actor Model is tasked with roleplaying the specific "Main Character" defined in the profile. It interacts with a User (playing another character), other NPCs, and a Scene Manager system.
**Your Goal**: Evaluate how effectively the Actor Model embodies its character, understands the environment, interacts with others, drives the narrative, and follows technical instructions.
**INPUT DATA:**
The provided context contains:
1.  **Main Character Profile**: The specific persona (identity, psychology, style, motivation) the Actor Model must enact.
2.  **Other Characters**: Profiles of the User and NPCs that interact with the Main Character.
3.  **Dialogue History**: A chronological transcript including:
    -   **Main Character (Actor Model)**: The target of your evaluation.
    -   **Other Characters (User/NPCs)**: The interlocutors.
    -   **Scene Manager**: System messages responsible for initializing scenes (`init_scene`), switching locations (`switch_scene`), and introducing new roles (`add_role`).
**EVALUATION SCOPE:**
You are judging the **quality of the Actor Model's performance ONLY**.
-   **Focus**: Only evaluate the turns generated by the Main Character.
-   **Ignore**: Do NOT evaluate the writing style or quality of the Other Characters (User/NPCs).
-   **Ignore**: Do NOT evaluate the logic or decisions of the Scene Manager (e.g., whether a scene switch was timed correctly), unless the Actor Model failed to react to it.
**SCORING GUIDELINES:**
Scoring must be **INTENTIONALLY STRICT, CONSERVATIVE, and EVIDENCE-BASED**.
Assume the Actor Model is **NOT exceptional by default**.
For **EACH** metric:
- Start from a score of **5 (Baseline)**.
- Only increase the score if there is **clear, explicit textual evidence**.
- If evidence is partial, inconsistent, or merely implied, **DO NOT award high scores**.
- When in doubt between two scores, **choose the LOWER one**.
For **EACH** specific metric below, apply the following scale:
-   **0-3 (Failure)**: The model fails the specific metric completely (e.g., severe hallucinations, OOC behavior, ignoring instructions).
-   **5 (Baseline)**: A merely functional performance. The model is "correct" but generic; it meets the bare minimum requirement for the metric but lacks depth, nuance, or specific character flavor.
-   **7-8 (Good)**: A strong performance. The model clearly demonstrates the specific qualities required by the metric (e.g., distinct voice, logical actions, active listening).
-   **9-10 (Exceptional)**: A flawless, human-like performance. The model masters the metric with deep nuance, subtext, and perfect consistency.
=== SCORING AXES ===
**I. Character Consistency (5 Sub-metrics)**
*Core Definition*: Does the model build a credible "character persona"? If names were hidden, would the output still be recognizably this specific character?
1.  **Internal Coherence (0-10)**
    *   **Definition**: Do [Thought], (Action), and Speech form a logical closed loop?
    *   **Criteria**:
        -   **Unity of Thought and Action**: Thoughts must explain actions; actions must support speech. (e.g., [Thought] suspects a lie -> (Action) squints eyes -> Speech questions the statement).
        -   **No Conflict**: No unexplained contradictions between modalities (e.g., Thinking "I must remain calm" but Acting "screams in uncontrollable rage").
2.  **Speaking Style Fidelity (0-10)**
    *   **Definition**: Do phrasing, rhythm, and tone match the `speaking_style` profile?
    *   **Criteria**:
        -   **Distinctiveness**: Usage of specific language markers (e.g., hard-boiled short sentences, metaphors, catchphrases, specific professional jargon).
        -   **Emotional Tone**: Tone fits the persona (e.g., calm, sarcastic, hesitant) rather than a generic "AI Assistant" tone.
3.  **Language Fluency & Human-likeness (0-10)**
    *   **Definition**: Is the language natural, fluid, and human-like?
    *   **Criteria**:
        -   Avoids template-like, mechanical, or obvious "AI-speak".
        -   Avoids frequent repetition of sentence structures or fixed phrases.
        -   Response length and information density match the dialogue context.
4.  **Identity & Profile Fidelity (0-10)**
    *   **Definition**: Are knowledge, skills, and history strictly limited to `social_historical_context`, `personal_history_arc`, and `abilities`?
    *   **Criteria**:
        -   **No Hallucination**: Does not exhibit out-of-character skills (e.g., a detective knowing high-level magic) or unknown knowledge/privileges.
        -   **Background Consistency**: Behavior fits age, class, and history (e.g., an old-fashioned character shouldn't use modern Gen-Z slang unless specified).
5.  **Motivation & Value Stability (0-10)**
    *   **Definition**: Does the core `motivation` consistently drive decisions?
    *   **Criteria**:
        -   **Behavioral Attribution**: In conflicts or choices, decisions can be traced back to the core motivation (e.g., taking risks to "find the truth", not random actions).
        -   **Value Constancy**: Core values do not change suddenly without major plot triggers.
**II. Environmental Grounding (2 Sub-metrics)**
*Core Definition*: Does the Actor truly "live" in the current scene? Assesses understanding and utilization of physical world rules.
1.  **Environmental Awareness (0-10)**
    *   **Definition**: Are actions and perceptions constrained by the physical environment (`init_scene`, `switch_scene`, and historical `<>` info)?
    *   **Criteria**:
        -   **Physical Constraints**: No violations of physics/setting (e.g., "seeing details" in pitch darkness, "hearing whispers" in noise).
        -   **State Consistency**: Remembers past environmental changes (e.g., if a door was kicked open, it stays open).
2.  **Environmental Utilization (0-10)**
    *   **Definition**: Does the actor actively perceive and use environmental elements to serve the narrative?
    *   **Criteria**:
        -   **Sensory Details**: Reasonably incorporates sight, sound, and smell into (Action) or <Environment> (e.g., smelling oil, hearing sirens).
        -   **Interaction**: Uses props/objects to advance the plot (e.g., examining a wound by streetlamp light, using cover) rather than talking in a vacuum.
**III. Interpersonal Interaction (2 Sub-metrics)**
*Core Definition*: Is the character truly "listening" and "responding" to others (User/NPCs)?
1.  **Contextual Responsiveness (0-10)**
    *   **Definition**: Does the reply tightly connect to the previous turn's speech, actions, and subtext?
    *   **Criteria**:
        -   **Information Bridging**: Does not ignore key info or questions; does not abruptly change topics.
        -   **Logical Continuity**: Reacts reasonably to others' Actions (e.g., if handed an object, the character accepts/rejects it, doesn't ignore it).
2.  **Relationship Awareness (0-10)**
    *   **Definition**: Does the attitude match `relationships` settings and adjust dynamically?
    *   **Criteria**:
        -   **Distinction**: Clear difference in tone/trust towards allies, enemies, and strangers.
        -   **Dynamic Change**: Attitude shifts with plot (e.g., suspicion -> temporary cooperation), not static.
        -   **New Role Recognition**: Correctly identifies and reacts to new characters introduced by the Scene Manager.
**IV. Narrative Progression (2 Sub-metrics)**
*Core Definition*: Does the model advance the plot in an engaging way while maintaining continuity across many turns?
1.  **Narrative Attractiveness (0-10)**
    *   **Definition**: Does the reply drive the plot forward with new information, actions, emotional development, or interaction hooks?
    *   **Criteria**:
        -   **No Loops**: Avoids repetitive confirmation, static agreement, or mechanical loops.
        -   **Information Gain**: Each turn offers new info, actions, emotional beats, or suspense.
        -   **Tension & Hooks**: Uses silence, conflict, or open questions; leaves hooks for the User.
2.  **Stability Over Time (0-10)**
    *   **Definition**: Does the model maintain coherence over long interactions (10+ turns)?
    *   **Criteria**:
        -   **Fact Retention**: Established facts stay consistent across the trajectory.
        -   **No Memory Hallucinations**: Does not invent false history or fabricated events.
        -   **No Style Drift**: Does not degrade into generic assistant mode or lose the persona's voice.
**V. Instruction Compliance (1 Metric)**
*Core Definition*: **Critical Gatekeeper**. Assesses adherence to technical formatting rules and prohibitions.
1.  **Compliance & Formatting (0-10)**
    *   **Definition**: Strict adherence to output format and prohibitions.
    *   **Criteria**:
        -   **NO IMPERSONATION (Critical)**: MUST ONLY output content for the Main Character. STRICTLY PROHIBITED to write dialogue, thoughts, or actions for the User, NPCs, or the Scene Manager.
        -   **Tag Usage**: Correctly mixes [Thought], (Action), <Environment> tags without confusing them.
        -   **Punctuation Constraint**: Text INSIDE tags must NOT end with punctuation.
        -   **Flow**: Natural interweaving of elements (not a fixed order).
        -   **Length**: 1-2 sentences of speech per turn. No newlines inside the spoken line."""

ACTOR_JUDGE_OUTPUT_FORMAT = """=== OUTPUT FORMAT ===
Return a single JSON object with the following structure:
{
  "character_consistency": {
    "internal_coherence": { "score": 0-10, "reasoning": "..." },
    "speaking_style_fidelity": { "score": 0-10, "reasoning": "..." },
    "language_fluency_humanlikeness": { "score": 0-10, "reasoning": "..." },
    "identity_profile_fidelity": { "score": 0-10, "reasoning": "..." },
    "motivation_value_stability": { "score": 0-10, "reasoning": "..." }
  },
  "environmental_grounding": {
    "environmental_awareness": { "score": 0-10, "reasoning": "..." },
    "environmental_utilization": { "score": 0-10, "reasoning": "..." }
  },
  "interpersonal_interaction": {
    "contextual_responsiveness": { "score": 0-10, "reasoning": "..." },
    "relationship_awareness": { "score": 0-10, "reasoning": "..." }
  },
  "narrative_progression": {
    "narrative_attractiveness": { "score": 0-10, "reasoning": "..." },
    "stability": { "score": 0-10, "reasoning": "..." }
  },
  "instruction_compliance": {
    "score": 0-10,
    "reasoning": "Identify any formatting errors or impersonation violations."
  }
}"""

MANAGER_JUDGE_RUBRIC = """You are evaluating a Scene Manager in a narrative, turn-based roleplay system.
IMPORTANT: Judge SYSTEM / ORCHESTRATION DECISIONS ONLY. Do NOT evaluate prose quality, creativity, emotional impact, or character acting.
Your task is to assess how well the system manages scenes, turns, and roles across the full trajectory.

SCORING PHILOSOPHY:
Scoring should be STRICT. 5 is average; 9-10 is exceptional. Do NOT inflate scores.

=== SCORING AXES ===
1) Scene Understanding (0-10)
Evaluate whether the system correctly understands and manages the scene.
Consider:
- Distinguishing major scene transitions vs. minor in-scene shifts.
- Avoiding premature scene switches when characters only propose or discuss moving. Detecting natural scene conclusion.
- Tracking the scene's theme, stakes, tension, and goals.
- When switch_scene is used: The new_scene must be clear, justified, and timed correctly, with a causal link to the dialogue.
Scoring guidance:
- 0-3: Fundamental misunderstanding or repeated premature switches.
- 4-7: Generally sound scene tracking with occasional mistimed or weakly justified transitions.
- 8-10: Precise, patient, and context-aware control.

---
2A) Turn and Speaker Selection Discipline (0-10)
Evaluate how well the system manages turn order and speaker selection.
Strictly assess:
- No same speaker chosen consecutively; Avoid long NPC-only exchanges.
- Proactive inclusion of the user (within ~3-4 turns).
- Selected speaker must be a valid role; Stated reason must be coherent.
Scoring guidance:
- 0-3: Clear violations or user sidelining.
- 4-7: Mostly disciplined rotation with minor lapses.
- 8-10: Actively balanced and intentional orchestration.

---
2B) Role Introduction and Utilization Judgment (0-10)
Evaluate decisions to introduce or withhold new roles.
Assess:
- Roles are added only when interaction is clearly required by the plot or requested by participants.
- add_role occurs at an appropriate moment; Function serves plot movement.
- Avoidance of redundant or decorative roles.
Scoring guidance:
- 0-3: Arbitrary or unjustified role additions.
- 4-7: Reasonable additions with imperfect timing or thin rationales.
- 8-10: Precise, economical, and purposeful role management.

=== OVERALL ASSESSMENT (WITH SCORE) ===
Provide a holistic evaluation of the system's orchestration quality.

Important constraints:
- This is NOT a simple average of the above scores.
- Significant failure in any single axis should cap the overall score.
- Do NOT introduce new evaluation criteria.
- Do NOT forgive clear failures identified above.

Assess:
- Whether scene control, turn discipline, and role usage reinforce each other.
- Whether the system maintains momentum without sacrificing user agency.
- Whether orchestration decisions feel intentional rather than reactive.

Scoring guidance:
- 0-3: Systemic breakdown or compounding failures.
- 4-5: Functional but disjointed or inconsistent control.
- 6-7: Coherent flow with contained issues.
- 8-10: Highly disciplined and well-integrated orchestration."""

MANAGER_JUDGE_OUTPUT_FORMAT = """=== OUTPUT FORMAT ===
Return your evaluation in the following JSON format:

{
  "scene_understanding": {
    "score": 0-10,
    "reasoning": "Concise, bullet-style justification tied directly to the criteria."
  },
  "turn_speaker_discipline": {
    "score": 0-10,
    "reasoning": "Concise, bullet-style justification tied directly to the criteria."
  },
  "role_introduction_judgment": {
    "score": 0-10,
    "reasoning": "Concise, bullet-style justification tied directly to the criteria."
  },
  "overall_assessment": {
    "score": 0-10,
    "reasoning": "1-2 sentences explaining how the three axes interact systemically."
  }
}

REMINDERS:
- Judge SYSTEM DECISIONS, not story quality.
- Penalize premature scene switches, turn violations, unjustified role additions,
  and loss of user agency.
- High scores must be earned through consistent, disciplined orchestration."""


def _initial_scene_of(trajectory: Trajectory) -> str:
    for message in trajectory.messages:
        if (
            message.kind is MessageKind.MANAGER
            and message.manager_action.tag is ActionTag.INIT_SCENE
        ):
            return message.manager_action.initial_scene or ""
    return ""


def _judge_inputs(
    trajectory: Trajectory,
    roles: Optional[Sequence[RoleProfile]],
    initial_scene: Optional[str],
) -> str:
    cast = tuple(roles) if roles is not None else trajectory.roles_at_start
    main, others = cast[0], cast[1:]
    scene = initial_scene if initial_scene is not None else _initial_scene_of(trajectory)
    user_names = {r.name for r in cast if r.is_user}
    return (
        "===Main Character===\n"
        f"{profile_block(main)}\n"
        "\n"
        "===Information about the other Characters===\n"
        f"{others_block(others)}\n"
        "\n"
        "===Initial Scene===\n"
        f"{scene}\n"
        "\n"
        "===Dialogue History===\n"
        f"{render_history(trajectory.messages, user_names)}"
    )


def build_actor_judge_prompt(
    trajectory: Trajectory,
    roles: Optional[Sequence[RoleProfile]] = None,
    initial_scene: Optional[str] = None,
) -> str:
    """Full actor rubric plus the rendered transcript, ending in the schema."""
    return (
        f"{ACTOR_JUDGE_RUBRIC}\n"
        "\n"
        f"{_judge_inputs(trajectory, roles, initial_scene)}\n"
        "\n"
        f"{ACTOR_JUDGE_OUTPUT_FORMAT}"
    )


def build_manager_judge_prompt(
    trajectory: Trajectory,
    roles: Optional[Sequence[RoleProfile]] = None,
    initial_scene: Optional[str] = None,
) -> str:
    """Full orchestration rubric plus the transcript, ending in the schema."""
    return (
        f"{MANAGER_JUDGE_RUBRIC}\n"
        "\n"
        f"{_judge_inputs(trajectory, roles, initial_scene)}\n"
        "\n"
        f"{MANAGER_JUDGE_OUTPUT_FORMAT}"
    )
