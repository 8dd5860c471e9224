"""SQLite store for benchmark runs."""

import datetime
import json
import logging
import sqlite3
import threading

from .report import to_builtin

logger = logging.getLogger(__name__)


class ResultsDatabase:
    """SQLite database manager for benchmark runs and their result rows."""

    def __init__(self, db_path="hmclab.db"):
        self.db_path = db_path
        self._local = threading.local()
        # Initialize in the current thread
        self._get_connection()

    def _get_connection(self):
        """Get or create a thread-local database connection."""
        if not hasattr(self._local, 'conn') or self._local.conn is None:
            logger.debug(f"Creating new SQLite connection in thread {threading.get_ident()}")
            self._local.conn = sqlite3.connect(self.db_path, check_same_thread=False)
            self._local.cursor = self._local.conn.cursor()
            self._create_tables()
        return self._local.conn, self._local.cursor

    def _create_tables(self):
        """Create necessary database tables if they don't exist."""
        conn, cursor = self._get_connection()

        cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            command TEXT NOT NULL,
            config TEXT NOT NULL,
            passed INTEGER,
            created_at DATETIME NOT NULL
        )
        ''')

        cursor.execute('''
        CREATE TABLE IF NOT EXISTS run_rows (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER NOT NULL,
            algorithm TEXT,
            seed INTEGER,
            payload TEXT NOT NULL,
            FOREIGN KEY (run_id) REFERENCES runs (id)
        )
        ''')

        conn.commit()

    def save_run(self, command, config, rows, passed=None):
        """Store a finished command with its rows; returns the run id or None."""
        conn, cursor = self._get_connection()
        now = datetime.datetime.now().isoformat()
        try:
            cursor.execute(
                "INSERT INTO runs (command, config, passed, created_at) VALUES (?, ?, ?, ?)",
                (command, json.dumps(to_builtin(config), sort_keys=True),
                 None if passed is None else int(bool(passed)), now)
            )
            run_id = cursor.lastrowid
            cursor.executemany(
                "INSERT INTO run_rows (run_id, algorithm, seed, payload) VALUES (?, ?, ?, ?)",
                [(run_id, row.get('algorithm'), row.get('seed'), json.dumps(to_builtin(row)))
                 for row in rows]
            )
            conn.commit()
            return run_id
        except sqlite3.Error as e:
            logger.error(f"Database error when saving {command} run: {e}")
            conn.rollback()
            return None

    def get_run(self, run_id):
        """Retrieve a run with its rows, or None if it does not exist."""
        _, cursor = self._get_connection()
        cursor.execute(
            "SELECT id, command, config, passed, created_at FROM runs WHERE id = ?", (run_id,)
        )
        result = cursor.fetchone()
        if not result:
            return None
        cursor.execute("SELECT payload FROM run_rows WHERE run_id = ? ORDER BY id", (run_id,))
        rows = [json.loads(payload) for (payload,) in cursor.fetchall()]
        return {
            'id': result[0],
            'command': result[1],
            'config': json.loads(result[2]),
            'passed': None if result[3] is None else bool(result[3]),
            'created_at': result[4],
            'rows': rows,
        }

    def list_runs(self, limit=20):
        """Most recent runs first, without their rows."""
        _, cursor = self._get_connection()
        cursor.execute(
            """SELECT r.id, r.command, r.passed, r.created_at, COUNT(rr.id)
               FROM runs r LEFT JOIN run_rows rr ON rr.run_id = r.id
               GROUP BY r.id
               ORDER BY r.id DESC
               LIMIT ?""",
            (limit,)
        )
        return [
            {'id': run_id, 'command': command,
             'passed': None if passed is None else bool(passed),
             'created_at': created_at, 'rows': count}
            for run_id, command, passed, created_at, count in cursor.fetchall()
        ]

    def delete_run(self, run_id):
        """Delete a run and all its rows."""
        conn, cursor = self._get_connection()
        try:
            cursor.execute("DELETE FROM run_rows WHERE run_id = ?", (run_id,))
            cursor.execute("DELETE FROM runs WHERE id = ?", (run_id,))
            conn.commit()
            return cursor.rowcount > 0
        except sqlite3.Error as e:
            logger.error(f"Database error when deleting run {run_id}: {e}")
            conn.rollback()
            return False

    def close(self):
        """Close the database connection."""
        if hasattr(self._local, 'conn') and self._local.conn is not None:
            self._local.conn.close()
            self._local.conn = None
