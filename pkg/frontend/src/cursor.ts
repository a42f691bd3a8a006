// 2D cursor view-model for lower-limb sessions: left-right and up-down axes.

export interface CursorPoint {
  x: number; // -1..1, positive right
  y: number; // -1..1, positive up
}

const AXES: Record<string, CursorPoint> = {
  rest: { x: 0, y: 0 },
  inversion: { x: -1, y: 0 },
  eversion: { x: 1, y: 0 },
  dorsiflexion: { x: 0, y: 1 },
  plantarflexion: { x: 0, y: -1 },
};

export function cursorFromClass(classId: string, activation = 1.0): CursorPoint {
  const axis = AXES[classId];
  if (!axis) return { x: 0, y: 0 };
  return { x: axis.x * activation, y: axis.y * activation };
}
