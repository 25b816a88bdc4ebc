import sys
import threading
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatingest.notify import (
    CommandSink,
    Event,
    FileSink,
    Notification,
    notify,
    sink_from_spec,
)

AT = datetime(2026, 1, 2, 3, 4, 5, 678901, tzinfo=timezone.utc)


def test_serialized_line_format():
    n = Notification(Event.SUCCESS, 1, "tbl_Circuits.csv", "rows=7958 cols=12", AT)
    assert n.serialize() == (
        'event=SUCCESS sr=1 file=tbl_Circuits.csv detail="rows=7958 cols=12" '
        "at=2026-01-02T03:04:05.678901+00:00"
    )


def test_success_line_parses_back_equal():
    n = Notification(Event.SUCCESS, 1, "tbl_Circuits.csv", "rows=7958 cols=12")
    assert Notification.parse(n.serialize()) == n


_NAMES = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp")), min_size=1,
                 max_size=20)


@given(st.sampled_from(list(Event)), st.integers(min_value=1, max_value=10**9), _NAMES,
       st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40),
       st.datetimes(timezones=st.just(timezone.utc)))
def test_round_trip_any_values(event, sr, name, detail, at):
    n = Notification(event, sr, name, detail, at)
    line = n.serialize()
    assert "\n" not in line
    assert Notification.parse(line) == n


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        Notification.parse("hello")


def test_zero_sinks_is_noop():
    assert notify(Notification(Event.FAILURE, 1, "a.csv", "x"), []) == []


def test_file_sink_one_line_per_event(tmp_path):
    path = tmp_path / "n.log"
    sink = FileSink(path)
    sent = [Notification(e, i, "f.csv", "d") for i, e in enumerate(Event, start=1)]
    for n in sent:
        assert notify(n, [sink])[0].ok
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert [Notification.parse(line) for line in lines] == sent


def test_duplicate_notification_names_file(tmp_path):
    n = Notification(Event.DUPLICATE, 2, "tbl_Circuits111.csv", "first data rows match")
    assert "file=tbl_Circuits111.csv" in n.serialize()


def test_failing_command_is_reported_not_raised(tmp_path):
    path = tmp_path / "n.log"
    sinks = [CommandSink(f"{sys.executable} -c 'import sys; sys.exit(3)'"), FileSink(path)]
    report = notify(Notification(Event.FAILURE, 4, "a.csv", "boom"), sinks)
    assert [r.ok for r in report] == [False, True]
    assert "exit status 3" in report[0].error
    assert len(path.read_text().splitlines()) == 1


def test_missing_command_is_reported():
    report = notify(Notification(Event.FAILURE, 4, "a.csv", "boom"),
                    [CommandSink("/nonexistent/mailer --x")])
    assert not report[0].ok


def test_unwritable_file_sink_is_reported(tmp_path):
    report = notify(Notification(Event.SUCCESS, 1, "a.csv", "rows=1 cols=1"),
                    [FileSink(tmp_path / "missing" / "dir" / "n.log")])
    assert not report[0].ok and report[0].error


def test_command_receives_line_and_placeholders(tmp_path):
    out = tmp_path / "out.txt"
    script = ("import sys; open(sys.argv[1], 'w').write(sys.argv[2] + '|' + sys.argv[3] + '|' "
              "+ sys.argv[4] + '|' + sys.stdin.read())")
    template = f'{sys.executable} -c "{script}" {out} "ingest {{event}}" {{sr}} {{file}}'
    n = Notification(Event.DUPLICATE, 2, "tbl_Circuits111.csv", "dup", AT)
    assert notify(n, [sink_from_spec("command:" + template)])[0].ok
    assert out.read_text() == f"ingest DUPLICATE|2|tbl_Circuits111.csv|{n.serialize()}\n"


@pytest.mark.parametrize("spec", ["smtp:host", "file:", "nocolon", "command:"])
def test_bad_sink_specs(spec):
    with pytest.raises(ValueError):
        sink_from_spec(spec)


def test_parallel_file_appends_do_not_interleave(tmp_path):
    path = tmp_path / "n.log"
    detail = "x" * 5000

    def worker(k):
        sink = FileSink(path)
        for i in range(25):
            notify(Notification(Event.SUCCESS, k * 100 + i, "f.csv", detail), [sink])

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    lines = path.read_text().splitlines()
    assert len(lines) == 100
    assert sorted(Notification.parse(line).sr_num for line in lines) == \
        sorted(k * 100 + i for k in range(4) for i in range(25))
