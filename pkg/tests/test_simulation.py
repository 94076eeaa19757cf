from __future__ import annotations

import hashlib
import json
import os

import pytest

from conftest import CAST, end_json, pick_json, scripted_episode
from sceneweaver.errors import SeedError
from sceneweaver.model import (
    ActionTag,
    MessageKind,
    Termination,
    load_trajectory,
    save_trajectory,
)
from sceneweaver.protocol import Mode, audit_trajectory
from sceneweaver.simulation import (
    EpisodeConfig,
    EpisodeSettings,
    load_seed_set,
    run_bench,
    run_episode,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


class TestRunEpisode:
    def test_immediate_end(self):
        cfg = scripted_episode(manager_script=[end_json()], actor_script=[], user_script=[])
        trajectory = run_episode(cfg)
        assert trajectory.termination is Termination.MANAGER_END
        assert trajectory.dialogue_turn_count == 0
        tags = [m.manager_action.tag for m in trajectory.messages]
        assert tags == [ActionTag.INIT_SCENE, ActionTag.END]

    def test_horizon_of_twenty(self):
        cfg = scripted_episode(horizon=20)
        trajectory = run_episode(cfg)
        assert trajectory.termination is Termination.HORIZON_REACHED
        assert trajectory.dialogue_turn_count == 20
        final = trajectory.messages[-1]
        assert final.manager_action.tag is ActionTag.END
        assert final.manager_action.reason == "Reached the 20-turn dialogue limit."

    def test_first_message_is_the_only_init(self):
        trajectory = run_episode(scripted_episode(horizon=6))
        inits = [
            m
            for m in trajectory.messages
            if m.kind is MessageKind.MANAGER and m.manager_action.tag is ActionTag.INIT_SCENE
        ]
        assert trajectory.messages[0] in inits
        assert len(inits) == 1

    def test_deterministic_files(self, tmp_path):
        digests = []
        for run in range(2):
            trajectory = run_episode(scripted_episode(horizon=8))
            path = tmp_path / f"run{run}.traj"
            save_trajectory(trajectory, str(path))
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_prefixless_turn_attributed_to_picked_speaker(self):
        cfg = scripted_episode(
            manager_script=[pick_json(CAST[0]), end_json()],
            actor_script=["(no name prefix) just speaking"],
            user_script=[],
        )
        trajectory = run_episode(cfg)
        turn = next(m for m in trajectory.messages if m.kind is MessageKind.CHARACTER)
        assert turn.author == CAST[0]

    def test_colon_in_speech_not_stripped(self):
        cfg = scripted_episode(
            manager_script=[pick_json(CAST[0]), end_json()],
            actor_script=["Remember: stay close"],
            user_script=[],
        )
        trajectory = run_episode(cfg)
        turn = next(m for m in trajectory.messages if m.kind is MessageKind.CHARACTER)
        assert turn.segments[0].text == "Remember: stay close"

    def test_invalid_manager_output_falls_back_to_rotation(self):
        cfg = scripted_episode(
            manager_script=["nonsense", "more nonsense", "still not json", end_json()],
            actor_script=[f"{CAST[0]}: (grim) We hold the line."],
            user_script=[],
        )
        trajectory = run_episode(cfg)
        assert trajectory.termination is Termination.MANAGER_END
        turn = next(m for m in trajectory.messages if m.kind is MessageKind.CHARACTER)
        # least-recently-heard rotation starts from the first role
        assert turn.author == CAST[0]

    def test_rejected_verdict_consumes_a_retry(self):
        # picking the same speaker twice in a row is invalid; the engine
        # re-requests and accepts the corrected decision
        cfg = scripted_episode(
            manager_script=[
                pick_json(CAST[0]),
                pick_json(CAST[0]),
                pick_json(CAST[1]),
                end_json(),
            ],
            actor_script=[f"{CAST[0]}: (calm) First turn."],
            user_script=[f"{CAST[1]}: Second turn."],
        )
        trajectory = run_episode(cfg)
        authors = [m.author for m in trajectory.messages if m.kind is MessageKind.CHARACTER]
        assert authors == [CAST[0], CAST[1]]

    def test_backend_exhaustion_preserves_partial_history(self):
        cfg = scripted_episode(manager_script=[], actor_script=[], user_script=[])
        trajectory = run_episode(cfg)
        assert trajectory.termination is Termination.BACKEND_FAILURE
        assert len(trajectory.messages) == 1  # the seeded init survives

    def test_persist_pick_speaker_flag(self):
        cfg = scripted_episode(horizon=3, persist_pick_speaker=True)
        trajectory = run_episode(cfg)
        picks = [
            m
            for m in trajectory.messages
            if m.kind is MessageKind.MANAGER and m.manager_action.tag is ActionTag.PICK_SPEAKER
        ]
        assert len(picks) == 3
        assert audit_trajectory(trajectory, Mode.ENHANCE).ok

    def test_audit_clean_episode(self):
        trajectory = run_episode(scripted_episode(horizon=6))
        assert audit_trajectory(trajectory, Mode.ENHANCE).ok

    def test_step_indexes_strictly_increase(self):
        trajectory = run_episode(scripted_episode(horizon=6))
        steps = [m.step_index for m in trajectory.messages]
        assert steps == sorted(steps)
        assert len(set(steps)) == len(steps)


class TestLoadSeedSet:
    def test_fixture_seed_loads(self):
        configs = load_seed_set(os.path.join(FIXTURES, "adventure_seed.json"))
        assert len(configs) == 1
        assert configs[0].seed.topic == "Adventure"
        assert configs[0].seed.seed_id == "adventure-001"
        users = [r for r in configs[0].seed.roles if r.is_user]
        assert [u.name for u in users] == ["Valdrex"]

    def test_two_users_rejected(self, tmp_path):
        entry = json.loads(
            open(os.path.join(FIXTURES, "adventure_seed.json"), encoding="utf-8").read()
        )[0]
        entry["other_characters"][0]["name"] = "Taron Corvith (user)"
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(entry) + "\n", encoding="utf-8")
        with pytest.raises(SeedError) as excinfo:
            load_seed_set(str(path))
        assert excinfo.value.index == 0

    def test_missing_scene_rejected(self, tmp_path):
        entry = json.loads(
            open(os.path.join(FIXTURES, "adventure_seed.json"), encoding="utf-8").read()
        )[0]
        entry["initial_scene"] = "  "
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(entry) + "\n", encoding="utf-8")
        with pytest.raises(SeedError):
            load_seed_set(str(path))

    def test_jsonl_and_array_forms(self, tmp_path):
        entry = json.loads(
            open(os.path.join(FIXTURES, "adventure_seed.json"), encoding="utf-8").read()
        )[0]
        jsonl = tmp_path / "seeds.jsonl"
        jsonl.write_text(json.dumps(entry) + "\n" + json.dumps(entry) + "\n", encoding="utf-8")
        configs = load_seed_set(str(jsonl), EpisodeSettings(horizon=5))
        assert len(configs) == 2
        assert all(c.horizon == 5 for c in configs)


class TestRunBench:
    def _configs(self, n: int, horizon: int = 4) -> list[EpisodeConfig]:
        return [
            scripted_episode(seed_id=f"seed-{i:03d}", horizon=horizon, seed_tag=f" s{i}")
            for i in range(n)
        ]

    def test_four_seeds_parallel_two(self, tmp_path):
        result = run_bench(self._configs(4), str(tmp_path), parallelism=2)
        assert result.manifest["ok"] == 4
        names = sorted(os.listdir(tmp_path / "trajectories"))
        assert names == [f"seed-{i:03d}.traj" for i in range(4)]
        assert [e["seed_id"] for e in result.manifest["episodes"]] == [
            f"seed-{i:03d}" for i in range(4)
        ]

    def test_failed_episode_recorded_and_run_continues(self, tmp_path):
        configs = self._configs(4)
        configs[2] = scripted_episode(seed_id="seed-002", manager_script=[])
        result = run_bench(configs, str(tmp_path), parallelism=2)
        assert result.manifest["ok"] == 3
        statuses = [e["status"] for e in result.manifest["episodes"]]
        assert statuses == ["ok", "ok", "backend_failure", "ok"]

    def test_parallelism_does_not_change_digests(self, tmp_path):
        result_a = run_bench(self._configs(6), str(tmp_path / "p1"), parallelism=1)
        result_b = run_bench(self._configs(6), str(tmp_path / "p4"), parallelism=4)
        digests_a = [e["digest"] for e in result_a.manifest["episodes"]]
        digests_b = [e["digest"] for e in result_b.manifest["episodes"]]
        assert digests_a == digests_b

    def test_saved_trajectories_roundtrip(self, tmp_path):
        result = run_bench(self._configs(2), str(tmp_path), parallelism=1)
        for entry, trajectory in zip(result.manifest["episodes"], result.trajectories):
            loaded = load_trajectory(os.path.join(str(tmp_path), entry["path"]))
            assert loaded == trajectory


class TestKeyedReplay:
    def test_recorded_episode_replays_identically_from_keyed_scripts(self):
        """An ordered-script episode can be re-run from digest-keyed backends
        built out of its exchange log, independent of request ordering."""
        from sceneweaver.gateway import KeyedScriptedBackend, ScriptedBackend
        from sceneweaver.simulation import EpisodeBackends

        cfg = scripted_episode(horizon=6)
        ordered = EpisodeBackends(
            actor=ScriptedBackend(cfg.actor_backend.script),
            user=ScriptedBackend(cfg.user_backend.script),
            manager=ScriptedBackend(cfg.manager_backend.script),
        )
        first = run_episode(cfg, ordered)

        keyed = EpisodeBackends(
            actor=KeyedScriptedBackend(dict(ordered.actor.exchange_log)),
            user=KeyedScriptedBackend(dict(ordered.user.exchange_log)),
            manager=KeyedScriptedBackend(dict(ordered.manager.exchange_log)),
        )
        second = run_episode(cfg, keyed)
        assert second == first
